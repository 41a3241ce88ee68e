#include "genie/layers.hpp"

#include <stdexcept>

namespace genie {

SegmentIndex dst_segments(const Graph& g) {
  SegmentIndex seg;
  seg.segment_of_edge = g.edge_dst;
  seg.num_segments = g.num_nodes;
  return seg;
}

Tensor input_embed(Tape& tape, const Tensor& x, const Tensor& wx) {
  return tape.matmul(x, wx);
}

Tensor attention_scores(Tape& tape, const Tensor& h, const Graph& g, const BreadthParams& theta) {
  if (!g.has_self_loops)
    throw std::invalid_argument("attention_scores: graph must include self-loops");
  if (h.rows != g.num_nodes)
    throw std::invalid_argument("attention_scores: embedding rows differ from node count");

  Tensor h_dst = tape.gather_rows(h, g.edge_dst);
  Tensor h_src = tape.gather_rows(h, g.edge_src);
  Tensor pair = tape.add(tape.matmul(h_dst, theta.Ws), tape.matmul(h_src, theta.Wd));
  Tensor raw = tape.matmul(tape.tanh(pair), theta.v);
  return tape.segment_softmax(raw, dst_segments(g));
}

Tensor breadth_preactivation(Tape& tape, const Tensor& h, const Graph& g, const BreadthParams& theta,
                             Tensor* alpha_out) {
  Tensor alpha = attention_scores(tape, h, g, theta);
  if (alpha_out) *alpha_out = alpha;
  Tensor weighted = tape.scale_rows(tape.gather_rows(h, g.edge_src), alpha);
  Tensor aggregated = tape.segment_sum(weighted, dst_segments(g));
  Tensor pre = tape.matmul(aggregated, theta.W);
  if (theta.b.size() > 0) pre = tape.add_rowvec(pre, theta.b);
  return pre;
}

Tensor breadth_aggregate(Tape& tape, const Tensor& h, const Graph& g, const BreadthParams& theta,
                         Tensor* alpha_out) {
  return tape.tanh(breadth_preactivation(tape, h, g, theta, alpha_out));
}

namespace {

// z * Wg (+ bg when present), shared by the gate preactivations.
Tensor gate_pre(Tape& tape, const Tensor& z, const Tensor& wg, const Tensor& bg) {
  Tensor pre = tape.matmul(z, wg);
  if (bg.size() > 0) pre = tape.add_rowvec(pre, bg);
  return pre;
}

}  // namespace

std::pair<Tensor, Tensor> depth_update(Tape& tape, const Tensor& h_tmp, const Tensor& c_prev,
                                       const DepthParams& phi) {
  Tensor gi = tape.sigmoid(gate_pre(tape, h_tmp, phi.Wi, phi.bi));
  Tensor gf = tape.sigmoid(gate_pre(tape, h_tmp, phi.Wf, phi.bf));
  Tensor go = tape.sigmoid(gate_pre(tape, h_tmp, phi.Wo, phi.bo));
  Tensor cc = tape.tanh(gate_pre(tape, h_tmp, phi.Wc, phi.bc));
  Tensor c_next = tape.add(tape.mul_elementwise(gf, c_prev), tape.mul_elementwise(gi, cc));
  Tensor h_next = tape.mul_elementwise(go, tape.tanh(c_next));
  return {h_next, c_next};
}

NodeState geniepath_layer(Tape& tape, const NodeState& state, const Graph& g, const BreadthParams& theta,
                          const DepthParams& phi, Tensor* alpha_out) {
  Tensor h_tmp = breadth_aggregate(tape, state.H, g, theta, alpha_out);
  auto [h_next, c_next] = depth_update(tape, h_tmp, state.C, phi);
  NodeState next;
  next.H = h_next;
  next.C = c_next;
  next.mu = state.mu;
  return next;
}

std::pair<Tensor, Tensor> geniepath_lazy_update(Tape& tape, const Tensor& h_t, const Tensor& mu_t,
                                                const Tensor& c_t, const DepthParams& phi) {
  Tensor z = tape.concat_cols(h_t, mu_t);
  Tensor gi = tape.sigmoid(gate_pre(tape, z, phi.Wi, phi.bi));
  Tensor gf = tape.sigmoid(gate_pre(tape, z, phi.Wf, phi.bf));
  Tensor go = tape.sigmoid(gate_pre(tape, z, phi.Wo, phi.bo));
  Tensor cc = tape.tanh(gate_pre(tape, z, phi.Wc, phi.bc));
  Tensor c_next = tape.add(tape.mul_elementwise(gf, c_t), tape.mul_elementwise(gi, cc));
  Tensor mu_next = tape.mul_elementwise(go, tape.tanh(c_next));
  return {mu_next, c_next};
}

Tensor gcn_layer(Tape& tape, const Tensor& h, const NormalizedAdjacency& adj, const Tensor& w,
                 Activation act, const Tensor* bias) {
  const Graph& g = adj.graph;
  if (h.rows != g.num_nodes) throw std::invalid_argument("gcn_layer: embedding rows differ from node count");
  Tensor weights(static_cast<int>(adj.edge_weight.size()), 1);
  weights.data = adj.edge_weight;
  Tensor mixed = tape.segment_sum(tape.scale_rows(tape.gather_rows(h, g.edge_src), weights), dst_segments(g));
  Tensor pre = tape.matmul(mixed, w);
  if (bias) pre = tape.add_rowvec(pre, *bias);
  return act == Activation::kTanh ? tape.tanh(pre) : pre;
}

Tensor residual_wrap(Tape& tape, const Tensor& h_layer, const Tensor& h_prev, Residual mode,
                     const Tensor* wr) {
  switch (mode) {
    case Residual::kNone:
      return h_layer;
    case Residual::kAdd:
      return tape.add(h_layer, h_prev);
    case Residual::kConcat: {
      if (!wr) throw std::invalid_argument("residual_wrap: concat mode needs a projection matrix");
      return tape.matmul(tape.concat_cols(h_layer, h_prev), *wr);
    }
  }
  throw std::logic_error("residual_wrap: unknown mode");
}

}  // namespace genie
