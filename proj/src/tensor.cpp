#include "genie/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace genie {

Tensor Tensor::from(std::initializer_list<std::initializer_list<double>> rows_init) {
  const int r = static_cast<int>(rows_init.size());
  const int c = r > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
  Tensor t(r, c);
  int i = 0;
  for (const auto& row : rows_init) {
    if (static_cast<int>(row.size()) != c) throw std::invalid_argument("Tensor::from: ragged rows");
    int j = 0;
    for (double v : row) t.at(i, j++) = v;
    ++i;
  }
  return t;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.rows == b.rows && a.cols == b.cols; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace genie
