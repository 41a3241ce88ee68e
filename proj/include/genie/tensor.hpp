#pragma once

#include <initializer_list>
#include <vector>

namespace genie {

/// Dense row-major matrix of 64-bit floats. When produced by a Tape
/// operation, `node` holds the handle of the recording; -1 means the tensor
/// is a plain value not attached to any tape.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  int node = -1;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double v) {
    Tensor t(r, c);
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }
  /// Row-major literal, e.g. Tensor::from({{1, 2}, {3, 4}}).
  static Tensor from(std::initializer_list<std::initializer_list<double>> rows_init);
};

bool same_shape(const Tensor& a, const Tensor& b);

/// Largest absolute entry difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace genie
