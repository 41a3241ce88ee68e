#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "genie/tensor.hpp"

namespace genie {

/// Maps each edge to the node whose neighborhood it belongs to. Segment
/// reductions accumulate in edge order, so results are reproducible
/// bit-for-bit across runs.
struct SegmentIndex {
  std::vector<int> segment_of_edge;
  int num_segments = 0;
};

/// Define-by-run reverse-mode tape over dense matrices plus the edge-level
/// primitives (gather_rows / scale_rows / segment_softmax / segment_sum)
/// that keep neighborhood attention at O(|E|) compute and storage.
///
/// Every operation records its output on the tape and validates that the
/// result is finite. A tape supports one backward() per recording; reset()
/// clears it for the next iteration.
class Tape {
 public:
  /// Registers a differentiable leaf (parameter or input).
  Tensor leaf(const Tensor& value);
  /// Registers a value that participates in the forward pass but reports no
  /// gradient of its own (e.g. fixed adjacency weights).
  Tensor constant(const Tensor& value);

  // Dense primitives.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  /// out[i, :] = a[i, :] + b[0, :]; b is a 1 x cols row (bias broadcast).
  Tensor add_rowvec(const Tensor& a, const Tensor& b);
  Tensor mul_elementwise(const Tensor& a, const Tensor& b);
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor sum(const Tensor& a);
  Tensor sum_squares(const Tensor& a);

  // Edge primitives.
  /// out[e, :] = h[index[e], :]; backward scatter-adds into the source rows.
  Tensor gather_rows(const Tensor& h, std::span<const int> index);
  /// out[e, k] = values[e, k] * weights[e, 0]; weights must be E x 1.
  Tensor scale_rows(const Tensor& values, const Tensor& weights);
  /// Softmax within each segment, stabilized by per-segment max subtraction.
  Tensor segment_softmax(const Tensor& scores, const SegmentIndex& seg);
  /// out[i, :] = sum of value rows whose segment is i, in edge order.
  Tensor segment_sum(const Tensor& values, const SegmentIndex& seg);

  // Fused losses (scalar outputs).
  /// Mean softmax cross-entropy over rows with mask != 0. labels[i] is the
  /// class index of row i (ignored where the mask is 0).
  Tensor masked_softmax_xent(const Tensor& logits, std::span<const int> labels,
                             std::span<const std::uint8_t> mask);
  /// Mean per-entry sigmoid binary cross-entropy over masked rows of a 0/1
  /// label matrix with the same shape as logits.
  Tensor masked_sigmoid_bce(const Tensor& logits, const Tensor& bit_labels,
                            std::span<const std::uint8_t> mask);

  /// Reverse sweep from a scalar loss recorded on this tape. Gradients are
  /// retrievable through grad() until reset(); the tape is consumed.
  void backward(const Tensor& loss);
  /// Gradient of a recorded tensor (valid after backward()).
  const Tensor& grad(const Tensor& t) const;
  const Tensor& value(int node) const;

  bool consumed() const { return consumed_; }
  std::size_t num_recorded() const { return nodes_.size(); }
  /// Total doubles stored by recorded values so far (forward memory).
  std::size_t allocated_doubles() const { return allocated_doubles_; }
  void reset();

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kMatMul,
    kAdd,
    kAddRowVec,
    kMulElem,
    kTanh,
    kSigmoid,
    kConcatCols,
    kScale,
    kSum,
    kSumSquares,
    kGatherRows,
    kScaleRows,
    kSegmentSoftmax,
    kSegmentSum,
    kMaskedSoftmaxXent,
    kMaskedSigmoidBce,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    Tensor value;
    Tensor saved;                    // extra activation some backwards need
    std::vector<int> idx;            // gather/segment indices or labels
    std::vector<std::uint8_t> mask;  // loss masks
    double c = 0.0;
    int num_segments = 0;
  };

  int record(Node node);
  Tensor result_of(int id) const;
  int handle_of(const Tensor& t, const char* op_name);
  const Node& node_at(int id) const;
  static void check_finite(const Tensor& t, const char* op_name);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::size_t allocated_doubles_ = 0;
  bool consumed_ = false;
  bool has_grads_ = false;
};

}  // namespace genie
