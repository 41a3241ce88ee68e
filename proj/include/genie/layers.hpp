#pragma once

#include <utility>

#include "genie/graph.hpp"
#include "genie/tape.hpp"
#include "genie/tensor.hpp"

namespace genie {

/// Breadth-attention parameters of one layer: W mixes the aggregated
/// neighborhood, Ws/Wd transform the aggregating node and its neighbor, and
/// v projects the pair score to a scalar.
struct BreadthParams {
  Tensor W;   // K x K
  Tensor Ws;  // K x K
  Tensor Wd;  // K x K
  Tensor v;   // K x 1
  Tensor b;   // optional 1 x K bias on the pre-activation; empty = disabled
};

/// Gate parameters of one depth step. K x K each; the lazy variant feeds
/// the gates a 2K-wide concatenation, so there they are 2K x K. The 1 x K
/// biases are optional (empty = disabled).
struct DepthParams {
  Tensor Wi;
  Tensor Wf;
  Tensor Wo;
  Tensor Wc;
  Tensor bi;
  Tensor bf;
  Tensor bo;
  Tensor bc;
};

/// Per-depth node state: hidden embedding, gated memory, and the lazy
/// variant's postponed state.
struct NodeState {
  Tensor H;
  Tensor C;
  Tensor mu;
};

enum class Activation { kIdentity, kTanh };
enum class Residual { kNone, kAdd, kConcat };

/// Segment index grouping edges by destination node.
SegmentIndex dst_segments(const Graph& g);

/// H0 = X * Wx, no activation.
Tensor input_embed(Tape& tape, const Tensor& x, const Tensor& wx);

/// Per-edge attention weights: softmax over each destination's in-edges of
///   v^T tanh(Ws^T h_dst + Wd^T h_src).
/// Requires a self-looped graph so every neighborhood includes the node
/// itself.
Tensor attention_scores(Tape& tape, const Tensor& h, const Graph& g, const BreadthParams& theta);

/// Attention-weighted neighborhood mix before the tanh:
///   pre_i = W^T sum_j alpha(h_i, h_j) h_j.
/// Returns the pre-activation; alpha_out (optional) receives the edge
/// weights for inspection.
Tensor breadth_preactivation(Tape& tape, const Tensor& h, const Graph& g, const BreadthParams& theta,
                             Tensor* alpha_out = nullptr);

/// tanh of breadth_preactivation.
Tensor breadth_aggregate(Tape& tape, const Tensor& h, const Graph& g, const BreadthParams& theta,
                         Tensor* alpha_out = nullptr);

/// LSTM-style gated memory update:
///   i,f,o = sigmoid(W_{i,f,o}^T h_tmp), c~ = tanh(Wc^T h_tmp),
///   C' = f . C + i . c~, H' = o . tanh(C').
std::pair<Tensor, Tensor> depth_update(Tape& tape, const Tensor& h_tmp, const Tensor& c_prev,
                                       const DepthParams& phi);

/// One full adaptive path layer: breadth aggregation then depth gating.
NodeState geniepath_layer(Tape& tape, const NodeState& state, const Graph& g, const BreadthParams& theta,
                          const DepthParams& phi, Tensor* alpha_out = nullptr);

/// Lazy-variant gate step over concat(h_t, mu_t); returns (mu_next, c_next).
std::pair<Tensor, Tensor> geniepath_lazy_update(Tape& tape, const Tensor& h_t, const Tensor& mu_t,
                                                const Tensor& c_t, const DepthParams& phi);

/// H' = act(adj . H . W [+ bias]) with the adjacency applied edge-wise,
/// never dense.
Tensor gcn_layer(Tape& tape, const Tensor& h, const NormalizedAdjacency& adj, const Tensor& w,
                 Activation act, const Tensor* bias = nullptr);

/// Skip connection around a layer output. kConcat projects the doubled
/// width back to K through wr (2K x K); kAdd requires matching shapes.
Tensor residual_wrap(Tape& tape, const Tensor& h_layer, const Tensor& h_prev, Residual mode,
                     const Tensor* wr = nullptr);

}  // namespace genie
