#include "genie/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace genie {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void Tape::check_finite(const Tensor& t, const char* op_name) {
  for (double x : t.data) {
    if (!std::isfinite(x)) throw std::runtime_error(std::string(op_name) + ": non-finite value produced");
  }
}

int Tape::record(Node node) {
  if (consumed_) throw std::runtime_error("tape already consumed; reset() before recording again");
  allocated_doubles_ += node.value.size() + node.saved.size();
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::result_of(int id) const {
  Tensor t = nodes_[id].value;
  t.node = id;
  return t;
}

const Tape::Node& Tape::node_at(int id) const { return nodes_[id]; }

int Tape::handle_of(const Tensor& t, const char* op_name) {
  if (t.node < 0) {
    Node n;
    n.op = Op::kConstant;
    n.value = t;
    n.value.node = -1;
    check_finite(n.value, op_name);
    return record(std::move(n));
  }
  require(t.node < static_cast<int>(nodes_.size()) && same_shape(nodes_[t.node].value, t),
          std::string(op_name) + ": tensor not recorded on this tape (stale handle?)");
  return t.node;
}

Tensor Tape::leaf(const Tensor& value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = value;
  n.value.node = -1;
  check_finite(n.value, "leaf");
  return result_of(record(std::move(n)));
}

Tensor Tape::constant(const Tensor& value) {
  Node n;
  n.op = Op::kConstant;
  n.value = value;
  n.value.node = -1;
  check_finite(n.value, "constant");
  return result_of(record(std::move(n)));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ (" + std::to_string(a.cols) + " vs " +
                                std::to_string(b.rows) + ")");
  const int ha = handle_of(a, "matmul");
  const int hb = handle_of(b, "matmul");
  Node n;
  n.op = Op::kMatMul;
  n.a = ha;
  n.b = hb;
  n.value = Tensor(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
    double* orow = n.value.data.data() + static_cast<std::size_t>(i) * b.cols;
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  check_finite(n.value, "matmul");
  return result_of(record(std::move(n)));
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require(same_shape(a, b), "add: shape mismatch");
  const int ha = handle_of(a, "add");
  const int hb = handle_of(b, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = ha;
  n.b = hb;
  n.value = Tensor(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) n.value.data[i] = a.data[i] + b.data[i];
  check_finite(n.value, "add");
  return result_of(record(std::move(n)));
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& b) {
  require(b.rows == 1 && b.cols == a.cols, "add_rowvec: expected a 1 x " + std::to_string(a.cols) + " row");
  const int ha = handle_of(a, "add_rowvec");
  const int hb = handle_of(b, "add_rowvec");
  Node n;
  n.op = Op::kAddRowVec;
  n.a = ha;
  n.b = hb;
  n.value = Tensor(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) n.value.at(i, j) = a.at(i, j) + b.at(0, j);
  check_finite(n.value, "add_rowvec");
  return result_of(record(std::move(n)));
}

Tensor Tape::mul_elementwise(const Tensor& a, const Tensor& b) {
  require(same_shape(a, b), "mul_elementwise: shape mismatch");
  const int ha = handle_of(a, "mul_elementwise");
  const int hb = handle_of(b, "mul_elementwise");
  Node n;
  n.op = Op::kMulElem;
  n.a = ha;
  n.b = hb;
  n.value = Tensor(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) n.value.data[i] = a.data[i] * b.data[i];
  check_finite(n.value, "mul_elementwise");
  return result_of(record(std::move(n)));
}

Tensor Tape::tanh(const Tensor& a) {
  const int ha = handle_of(a, "tanh");
  Node n;
  n.op = Op::kTanh;
  n.a = ha;
  n.value = Tensor(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) n.value.data[i] = std::tanh(a.data[i]);
  check_finite(n.value, "tanh");
  return result_of(record(std::move(n)));
}

Tensor Tape::sigmoid(const Tensor& a) {
  const int ha = handle_of(a, "sigmoid");
  Node n;
  n.op = Op::kSigmoid;
  n.a = ha;
  n.value = Tensor(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) n.value.data[i] = stable_sigmoid(a.data[i]);
  check_finite(n.value, "sigmoid");
  return result_of(record(std::move(n)));
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  require(a.rows == b.rows, "concat_cols: row counts differ");
  const int ha = handle_of(a, "concat_cols");
  const int hb = handle_of(b, "concat_cols");
  Node n;
  n.op = Op::kConcatCols;
  n.a = ha;
  n.b = hb;
  n.value = Tensor(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) n.value.at(i, j) = a.at(i, j);
    for (int j = 0; j < b.cols; ++j) n.value.at(i, a.cols + j) = b.at(i, j);
  }
  check_finite(n.value, "concat_cols");
  return result_of(record(std::move(n)));
}

Tensor Tape::scale(const Tensor& a, double c) {
  const int ha = handle_of(a, "scale");
  Node n;
  n.op = Op::kScale;
  n.a = ha;
  n.c = c;
  n.value = Tensor(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) n.value.data[i] = c * a.data[i];
  check_finite(n.value, "scale");
  return result_of(record(std::move(n)));
}

Tensor Tape::sum(const Tensor& a) {
  const int ha = handle_of(a, "sum");
  Node n;
  n.op = Op::kSum;
  n.a = ha;
  n.value = Tensor(1, 1);
  double s = 0.0;
  for (double x : a.data) s += x;
  n.value.at(0, 0) = s;
  check_finite(n.value, "sum");
  return result_of(record(std::move(n)));
}

Tensor Tape::sum_squares(const Tensor& a) {
  const int ha = handle_of(a, "sum_squares");
  Node n;
  n.op = Op::kSumSquares;
  n.a = ha;
  n.value = Tensor(1, 1);
  double s = 0.0;
  for (double x : a.data) s += x * x;
  n.value.at(0, 0) = s;
  check_finite(n.value, "sum_squares");
  return result_of(record(std::move(n)));
}

Tensor Tape::gather_rows(const Tensor& h, std::span<const int> index) {
  for (int id : index)
    require(id >= 0 && id < h.rows,
            "gather_rows: index " + std::to_string(id) + " out of range [0, " + std::to_string(h.rows) + ")");
  const int ha = handle_of(h, "gather_rows");
  Node n;
  n.op = Op::kGatherRows;
  n.a = ha;
  n.idx.assign(index.begin(), index.end());
  n.value = Tensor(static_cast<int>(index.size()), h.cols);
  for (std::size_t e = 0; e < index.size(); ++e) {
    const double* src = h.data.data() + static_cast<std::size_t>(index[e]) * h.cols;
    double* dst = n.value.data.data() + e * h.cols;
    for (int j = 0; j < h.cols; ++j) dst[j] = src[j];
  }
  check_finite(n.value, "gather_rows");
  return result_of(record(std::move(n)));
}

Tensor Tape::scale_rows(const Tensor& values, const Tensor& weights) {
  require(weights.cols == 1, "scale_rows: weights must be a column");
  require(weights.rows == values.rows, "scale_rows: row counts differ");
  const int ha = handle_of(values, "scale_rows");
  const int hb = handle_of(weights, "scale_rows");
  Node n;
  n.op = Op::kScaleRows;
  n.a = ha;
  n.b = hb;
  n.value = Tensor(values.rows, values.cols);
  for (int e = 0; e < values.rows; ++e) {
    const double w = weights.at(e, 0);
    for (int j = 0; j < values.cols; ++j) n.value.at(e, j) = w * values.at(e, j);
  }
  check_finite(n.value, "scale_rows");
  return result_of(record(std::move(n)));
}

Tensor Tape::segment_softmax(const Tensor& scores, const SegmentIndex& seg) {
  require(scores.cols == 1, "segment_softmax: scores must be a column");
  require(scores.rows > 0, "segment_softmax: empty tensor");
  require(static_cast<int>(seg.segment_of_edge.size()) == scores.rows,
          "segment_softmax: segment index length differs from score count");
  for (int s : seg.segment_of_edge)
    require(s >= 0 && s < seg.num_segments, "segment_softmax: segment id out of range");
  const int ha = handle_of(scores, "segment_softmax");

  std::vector<double> seg_max(seg.num_segments, -std::numeric_limits<double>::infinity());
  for (int e = 0; e < scores.rows; ++e) {
    const int s = seg.segment_of_edge[e];
    seg_max[s] = std::max(seg_max[s], scores.at(e, 0));
  }
  Node n;
  n.op = Op::kSegmentSoftmax;
  n.a = ha;
  n.idx = seg.segment_of_edge;
  n.num_segments = seg.num_segments;
  n.value = Tensor(scores.rows, 1);
  std::vector<double> seg_sum(seg.num_segments, 0.0);
  for (int e = 0; e < scores.rows; ++e) {
    const double x = std::exp(scores.at(e, 0) - seg_max[seg.segment_of_edge[e]]);
    n.value.at(e, 0) = x;
    seg_sum[seg.segment_of_edge[e]] += x;
  }
  for (int e = 0; e < scores.rows; ++e) n.value.at(e, 0) /= seg_sum[seg.segment_of_edge[e]];
  check_finite(n.value, "segment_softmax");

  // Per-neighborhood weights must form a distribution.
  std::vector<double> check(seg.num_segments, 0.0);
  for (int e = 0; e < scores.rows; ++e) check[seg.segment_of_edge[e]] += n.value.at(e, 0);
  for (int s = 0; s < seg.num_segments; ++s) {
    if (std::isinf(seg_max[s])) continue;  // no edges in this segment
    if (std::fabs(check[s] - 1.0) > 1e-9)
      throw std::runtime_error("segment_softmax: segment " + std::to_string(s) + " does not sum to 1");
  }
  return result_of(record(std::move(n)));
}

Tensor Tape::segment_sum(const Tensor& values, const SegmentIndex& seg) {
  require(static_cast<int>(seg.segment_of_edge.size()) == values.rows,
          "segment_sum: segment index length differs from row count");
  for (int s : seg.segment_of_edge)
    require(s >= 0 && s < seg.num_segments, "segment_sum: segment id out of range");
  const int ha = handle_of(values, "segment_sum");
  Node n;
  n.op = Op::kSegmentSum;
  n.a = ha;
  n.idx = seg.segment_of_edge;
  n.num_segments = seg.num_segments;
  n.value = Tensor(seg.num_segments, values.cols);
  for (int e = 0; e < values.rows; ++e) {
    double* dst = n.value.data.data() + static_cast<std::size_t>(seg.segment_of_edge[e]) * values.cols;
    const double* src = values.data.data() + static_cast<std::size_t>(e) * values.cols;
    for (int j = 0; j < values.cols; ++j) dst[j] += src[j];
  }
  check_finite(n.value, "segment_sum");
  return result_of(record(std::move(n)));
}

Tensor Tape::masked_softmax_xent(const Tensor& logits, std::span<const int> labels,
                                 std::span<const std::uint8_t> mask) {
  require(static_cast<int>(labels.size()) == logits.rows, "masked_softmax_xent: label count differs from rows");
  require(static_cast<int>(mask.size()) == logits.rows, "masked_softmax_xent: mask length differs from rows");
  int selected = 0;
  for (int i = 0; i < logits.rows; ++i) {
    if (!mask[i]) continue;
    ++selected;
    require(labels[i] >= 0 && labels[i] < logits.cols,
            "masked_softmax_xent: label " + std::to_string(labels[i]) + " out of range at row " + std::to_string(i));
  }
  require(selected > 0, "masked_softmax_xent: empty mask");
  const int ha = handle_of(logits, "masked_softmax_xent");

  Node n;
  n.op = Op::kMaskedSoftmaxXent;
  n.a = ha;
  n.idx.assign(labels.begin(), labels.end());
  n.mask.assign(mask.begin(), mask.end());
  n.saved = Tensor(logits.rows, logits.cols);  // softmax probabilities of masked rows
  double total = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    if (!mask[i]) continue;
    double m = logits.at(i, 0);
    for (int c = 1; c < logits.cols; ++c) m = std::max(m, logits.at(i, c));
    double z = 0.0;
    for (int c = 0; c < logits.cols; ++c) z += std::exp(logits.at(i, c) - m);
    for (int c = 0; c < logits.cols; ++c) n.saved.at(i, c) = std::exp(logits.at(i, c) - m) / z;
    total += (m + std::log(z)) - logits.at(i, labels[i]);
  }
  n.value = Tensor(1, 1);
  n.value.at(0, 0) = total / selected;
  check_finite(n.value, "masked_softmax_xent");
  return result_of(record(std::move(n)));
}

Tensor Tape::masked_sigmoid_bce(const Tensor& logits, const Tensor& bit_labels,
                                std::span<const std::uint8_t> mask) {
  require(same_shape(logits, bit_labels), "masked_sigmoid_bce: label matrix shape differs from logits");
  require(static_cast<int>(mask.size()) == logits.rows, "masked_sigmoid_bce: mask length differs from rows");
  int selected = 0;
  for (int i = 0; i < logits.rows; ++i) selected += mask[i] ? 1 : 0;
  require(selected > 0, "masked_sigmoid_bce: empty mask");
  const int ha = handle_of(logits, "masked_sigmoid_bce");

  Node n;
  n.op = Op::kMaskedSigmoidBce;
  n.a = ha;
  n.mask.assign(mask.begin(), mask.end());
  // Backward needs sigma(z) - y; pack saved = [y | sigma(z)].
  n.saved = Tensor(logits.rows, 2 * logits.cols);
  double total = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    for (int c = 0; c < logits.cols; ++c) n.saved.at(i, c) = bit_labels.at(i, c);
    if (!mask[i]) continue;
    for (int c = 0; c < logits.cols; ++c) {
      const double z = logits.at(i, c);
      const double y = bit_labels.at(i, c);
      // max(z,0) - z*y + log(1 + exp(-|z|))
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
      n.saved.at(i, logits.cols + c) = stable_sigmoid(z);
    }
  }
  n.value = Tensor(1, 1);
  n.value.at(0, 0) = total / (static_cast<double>(selected) * logits.cols);
  check_finite(n.value, "masked_sigmoid_bce");
  return result_of(record(std::move(n)));
}

const Tensor& Tape::value(int node) const {
  if (node < 0 || node >= static_cast<int>(nodes_.size())) throw std::invalid_argument("value: bad node handle");
  return nodes_[node].value;
}

const Tensor& Tape::grad(const Tensor& t) const {
  if (!has_grads_) throw std::runtime_error("grad: no backward pass has run");
  if (t.node < 0 || t.node >= static_cast<int>(grads_.size()))
    throw std::invalid_argument("grad: tensor not recorded on this tape");
  return grads_[t.node];
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::runtime_error("backward: tape already consumed");
  if (loss.node < 0 || loss.node >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("backward: loss not recorded on this tape");
  if (loss.rows != 1 || loss.cols != 1) throw std::invalid_argument("backward: loss must be 1x1");

  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const Node& n : nodes_) grads_.emplace_back(n.value.rows, n.value.cols);
  grads_[loss.node].at(0, 0) = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& n = nodes_[i];
    const Tensor& g = grads_[i];
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[n.a].value;
        const Tensor& b = nodes_[n.b].value;
        Tensor& da = grads_[n.a];
        Tensor& db = grads_[n.b];
        // dA += g * B^T
        for (int r = 0; r < a.rows; ++r)
          for (int k = 0; k < b.cols; ++k) {
            const double grk = g.at(r, k);
            if (grk == 0.0) continue;
            for (int c = 0; c < a.cols; ++c) da.at(r, c) += grk * b.at(c, k);
          }
        // dB += A^T * g
        for (int r = 0; r < a.rows; ++r)
          for (int c = 0; c < a.cols; ++c) {
            const double arc = a.at(r, c);
            if (arc == 0.0) continue;
            for (int k = 0; k < b.cols; ++k) db.at(c, k) += arc * g.at(r, k);
          }
        break;
      }
      case Op::kAdd:
        for (std::size_t j = 0; j < g.data.size(); ++j) {
          grads_[n.a].data[j] += g.data[j];
          grads_[n.b].data[j] += g.data[j];
        }
        break;
      case Op::kAddRowVec:
        for (int r = 0; r < n.value.rows; ++r)
          for (int c = 0; c < n.value.cols; ++c) {
            grads_[n.a].at(r, c) += g.at(r, c);
            grads_[n.b].at(0, c) += g.at(r, c);
          }
        break;
      case Op::kMulElem: {
        const Tensor& a = nodes_[n.a].value;
        const Tensor& b = nodes_[n.b].value;
        for (std::size_t j = 0; j < g.data.size(); ++j) {
          grads_[n.a].data[j] += g.data[j] * b.data[j];
          grads_[n.b].data[j] += g.data[j] * a.data[j];
        }
        break;
      }
      case Op::kTanh:
        for (std::size_t j = 0; j < g.data.size(); ++j) {
          const double y = n.value.data[j];
          grads_[n.a].data[j] += g.data[j] * (1.0 - y * y);
        }
        break;
      case Op::kSigmoid:
        for (std::size_t j = 0; j < g.data.size(); ++j) {
          const double y = n.value.data[j];
          grads_[n.a].data[j] += g.data[j] * y * (1.0 - y);
        }
        break;
      case Op::kConcatCols: {
        const int ac = nodes_[n.a].value.cols;
        const int bc = nodes_[n.b].value.cols;
        for (int r = 0; r < n.value.rows; ++r) {
          for (int c = 0; c < ac; ++c) grads_[n.a].at(r, c) += g.at(r, c);
          for (int c = 0; c < bc; ++c) grads_[n.b].at(r, c) += g.at(r, ac + c);
        }
        break;
      }
      case Op::kScale:
        for (std::size_t j = 0; j < g.data.size(); ++j) grads_[n.a].data[j] += n.c * g.data[j];
        break;
      case Op::kSum: {
        const double s = g.at(0, 0);
        for (auto& x : grads_[n.a].data) x += s;
        break;
      }
      case Op::kSumSquares: {
        const double s = g.at(0, 0);
        const Tensor& a = nodes_[n.a].value;
        for (std::size_t j = 0; j < a.data.size(); ++j) grads_[n.a].data[j] += 2.0 * s * a.data[j];
        break;
      }
      case Op::kGatherRows: {
        Tensor& dh = grads_[n.a];
        const int k = n.value.cols;
        for (std::size_t e = 0; e < n.idx.size(); ++e) {
          double* dst = dh.data.data() + static_cast<std::size_t>(n.idx[e]) * k;
          const double* src = g.data.data() + e * k;
          for (int j = 0; j < k; ++j) dst[j] += src[j];
        }
        break;
      }
      case Op::kScaleRows: {
        const Tensor& v = nodes_[n.a].value;
        const Tensor& w = nodes_[n.b].value;
        for (int e = 0; e < v.rows; ++e) {
          const double we = w.at(e, 0);
          double dot = 0.0;
          for (int j = 0; j < v.cols; ++j) {
            grads_[n.a].at(e, j) += g.at(e, j) * we;
            dot += g.at(e, j) * v.at(e, j);
          }
          grads_[n.b].at(e, 0) += dot;
        }
        break;
      }
      case Op::kSegmentSoftmax: {
        // ds_e = a_e * (g_e - sum_{e' in seg} a_e' g_e')
        std::vector<double> seg_dot(n.num_segments, 0.0);
        for (std::size_t e = 0; e < n.idx.size(); ++e)
          seg_dot[n.idx[e]] += n.value.data[e] * g.data[e];
        for (std::size_t e = 0; e < n.idx.size(); ++e)
          grads_[n.a].data[e] += n.value.data[e] * (g.data[e] - seg_dot[n.idx[e]]);
        break;
      }
      case Op::kSegmentSum: {
        const int k = n.value.cols;
        for (std::size_t e = 0; e < n.idx.size(); ++e) {
          const double* src = g.data.data() + static_cast<std::size_t>(n.idx[e]) * k;
          double* dst = grads_[n.a].data.data() + e * k;
          for (int j = 0; j < k; ++j) dst[j] += src[j];
        }
        break;
      }
      case Op::kMaskedSoftmaxXent: {
        const double s = g.at(0, 0);
        int selected = 0;
        for (std::uint8_t m : n.mask) selected += m ? 1 : 0;
        Tensor& dz = grads_[n.a];
        const int cols = dz.cols;
        for (int r = 0; r < dz.rows; ++r) {
          if (!n.mask[r]) continue;
          for (int c = 0; c < cols; ++c) {
            const double p = n.saved.at(r, c);
            const double y = (c == n.idx[r]) ? 1.0 : 0.0;
            dz.at(r, c) += s * (p - y) / selected;
          }
        }
        break;
      }
      case Op::kMaskedSigmoidBce: {
        const double s = g.at(0, 0);
        int selected = 0;
        for (std::uint8_t m : n.mask) selected += m ? 1 : 0;
        Tensor& dz = grads_[n.a];
        const int cols = dz.cols;
        const double denom = static_cast<double>(selected) * cols;
        for (int r = 0; r < dz.rows; ++r) {
          if (!n.mask[r]) continue;
          for (int c = 0; c < cols; ++c) {
            const double y = n.saved.at(r, c);
            const double sig = n.saved.at(r, cols + c);
            dz.at(r, c) += s * (sig - y) / denom;
          }
        }
        break;
      }
    }
  }
  consumed_ = true;
  has_grads_ = true;
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  allocated_doubles_ = 0;
  consumed_ = false;
  has_grads_ = false;
}

}  // namespace genie
