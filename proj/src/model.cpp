#include "genie/model.hpp"

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace genie {

Variant parse_variant(const std::string& s) {
  if (s == "geniepath") return Variant::kGeniePath;
  if (s == "geniepath-lazy") return Variant::kGeniePathLazy;
  if (s == "gcn") return Variant::kGcn;
  if (s == "gcn-mean") return Variant::kGcnMean;
  if (s == "breadth-only") return Variant::kBreadthOnly;
  throw std::invalid_argument(
      "variant must be geniepath, geniepath-lazy, gcn, gcn-mean, or breadth-only, got '" + s + "'");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kGeniePath: return "geniepath";
    case Variant::kGeniePathLazy: return "geniepath-lazy";
    case Variant::kGcn: return "gcn";
    case Variant::kGcnMean: return "gcn-mean";
    case Variant::kBreadthOnly: return "breadth-only";
  }
  throw std::logic_error("unknown variant");
}

Residual parse_residual(const std::string& s) {
  if (s == "none") return Residual::kNone;
  if (s == "add") return Residual::kAdd;
  if (s == "concat") return Residual::kConcat;
  throw std::invalid_argument("residual must be none, add, or concat, got '" + s + "'");
}

std::string residual_name(Residual r) {
  switch (r) {
    case Residual::kNone: return "none";
    case Residual::kAdd: return "add";
    case Residual::kConcat: return "concat";
  }
  throw std::logic_error("unknown residual mode");
}

namespace {

bool uses_attention(Variant v) {
  return v == Variant::kGeniePath || v == Variant::kGeniePathLazy || v == Variant::kBreadthOnly;
}
bool uses_gates(Variant v) { return v == Variant::kGeniePath || v == Variant::kGeniePathLazy; }
bool uses_convolution(Variant v) { return v == Variant::kGcn || v == Variant::kGcnMean; }

std::string layer_key(int t, const char* suffix) {
  return "layer" + std::to_string(t) + "." + suffix;
}

void glorot_fill(Tensor& w, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (w.rows + w.cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (auto& x : w.data) x = u(rng);
}

}  // namespace

Model::Model(const ModelConfig& cfg, int in_features, int num_classes)
    : cfg_(cfg), in_features_(in_features), num_classes_(num_classes) {
  if (in_features < 1) throw std::invalid_argument("model: in_features must be >= 1");
  if (num_classes < 1) throw std::invalid_argument("model: num_classes must be >= 1");
  if (cfg.depth < 1) throw std::invalid_argument("model: depth must be >= 1");
  if (cfg.hidden < 1) throw std::invalid_argument("model: hidden must be >= 1");
  if (cfg.lr <= 0) throw std::invalid_argument("model: lr must be positive");
  if (cfg.l2_penalty < 0) throw std::invalid_argument("model: l2_penalty must be >= 0");
  if (cfg.epochs < 0) throw std::invalid_argument("model: epochs must be >= 0");
  if (cfg.patience < 1) throw std::invalid_argument("model: patience must be >= 1");

  const int k = cfg.hidden;
  wx_ = Tensor(in_features, k);
  if (cfg.bias) bx_ = Tensor(1, k);

  const int gate_rows = cfg.variant == Variant::kGeniePathLazy ? 2 * k : k;
  for (int t = 0; t < cfg.depth; ++t) {
    if (uses_attention(cfg.variant)) {
      BreadthParams theta;
      theta.W = Tensor(k, k);
      theta.Ws = Tensor(k, k);
      theta.Wd = Tensor(k, k);
      theta.v = Tensor(k, 1);
      if (cfg.bias) theta.b = Tensor(1, k);
      breadth_.push_back(std::move(theta));
    }
    if (uses_gates(cfg.variant)) {
      DepthParams phi;
      phi.Wi = Tensor(gate_rows, k);
      phi.Wf = Tensor(gate_rows, k);
      phi.Wo = Tensor(gate_rows, k);
      phi.Wc = Tensor(gate_rows, k);
      if (cfg.bias) {
        phi.bi = Tensor(1, k);
        phi.bf = Tensor(1, k);
        phi.bo = Tensor(1, k);
        phi.bc = Tensor(1, k);
      }
      gates_.push_back(std::move(phi));
    }
    if (uses_convolution(cfg.variant)) {
      gcn_w_.emplace_back(k, k);
      if (cfg.bias) gcn_b_.emplace_back(1, k);
    }
    if (cfg.residual == Residual::kConcat) res_proj_.emplace_back(2 * k, k);
  }
  cls_w_ = Tensor(k, num_classes);
  if (cfg.bias) cls_b_ = Tensor(1, num_classes);

  // One rng stream in parameter order keeps initialization a pure function
  // of the seed. Attention vectors and biases stay zero, so the first
  // epoch starts from uniform attention.
  std::mt19937_64 rng(cfg.seed);
  for (auto& ref : params())
    if (ref.weight_matrix) glorot_fill(*ref.tensor, rng);
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  out.push_back({"embed.Wx", &wx_, true});
  if (cfg_.bias) out.push_back({"embed.b", &bx_, false});
  for (int t = 0; t < cfg_.depth; ++t) {
    if (uses_attention(cfg_.variant)) {
      BreadthParams& theta = breadth_[t];
      out.push_back({layer_key(t, "W"), &theta.W, true});
      out.push_back({layer_key(t, "Ws"), &theta.Ws, true});
      out.push_back({layer_key(t, "Wd"), &theta.Wd, true});
      out.push_back({layer_key(t, "v"), &theta.v, false});
      if (cfg_.bias) out.push_back({layer_key(t, "b"), &theta.b, false});
    }
    if (uses_gates(cfg_.variant)) {
      DepthParams& phi = gates_[t];
      out.push_back({layer_key(t, "Wi"), &phi.Wi, true});
      out.push_back({layer_key(t, "Wf"), &phi.Wf, true});
      out.push_back({layer_key(t, "Wo"), &phi.Wo, true});
      out.push_back({layer_key(t, "Wc"), &phi.Wc, true});
      if (cfg_.bias) {
        out.push_back({layer_key(t, "bi"), &phi.bi, false});
        out.push_back({layer_key(t, "bf"), &phi.bf, false});
        out.push_back({layer_key(t, "bo"), &phi.bo, false});
        out.push_back({layer_key(t, "bc"), &phi.bc, false});
      }
    }
    if (uses_convolution(cfg_.variant)) {
      out.push_back({layer_key(t, "W"), &gcn_w_[t], true});
      if (cfg_.bias) out.push_back({layer_key(t, "b"), &gcn_b_[t], false});
    }
    if (cfg_.residual == Residual::kConcat) out.push_back({layer_key(t, "Wr"), &res_proj_[t], true});
  }
  out.push_back({"classifier.W", &cls_w_, true});
  if (cfg_.bias) out.push_back({"classifier.b", &cls_b_, false});
  return out;
}

std::vector<std::pair<std::string, Tensor>> Model::state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& ref : const_cast<Model*>(this)->params()) out.emplace_back(ref.name, *ref.tensor);
  return out;
}

void Model::load_state(std::span<const std::pair<std::string, Tensor>> state) {
  auto refs = params();
  std::map<std::string, ParamRef*> by_name;
  for (auto& r : refs) by_name[r.name] = &r;
  std::map<std::string, bool> seen;
  for (const auto& [name, value] : state) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::invalid_argument("load_state: unknown parameter '" + name + "'");
    if (seen[name]) throw std::invalid_argument("load_state: parameter '" + name + "' given twice");
    seen[name] = true;
    Tensor& dst = *it->second->tensor;
    if (value.rows != dst.rows || value.cols != dst.cols)
      throw std::invalid_argument("load_state: parameter '" + name + "' has shape " +
                                  std::to_string(value.rows) + "x" + std::to_string(value.cols) +
                                  ", expected " + std::to_string(dst.rows) + "x" + std::to_string(dst.cols));
    dst.data = value.data;
  }
  if (seen.size() != refs.size())
    throw std::invalid_argument("load_state: expected " + std::to_string(refs.size()) +
                                " parameters, got " + std::to_string(seen.size()));
}

PreparedGraph Model::prepare(const Graph& raw) const {
  PreparedGraph pg;
  pg.looped = add_self_loops(raw);
  if (cfg_.variant == Variant::kGcn) pg.adj = sym_norm_adjacency(pg.looped);
  else if (cfg_.variant == Variant::kGcnMean) pg.adj = row_norm_adjacency(pg.looped);
  return pg;
}

Tensor Model::forward(Tape& tape, const PreparedGraph& pg, const Tensor& x,
                      std::vector<Tensor>* bound_out, ForwardTrace* trace) const {
  const Graph& g = pg.looped;
  if (!g.has_self_loops) throw std::invalid_argument("forward: graph must come from prepare()");
  if (x.rows != g.num_nodes) throw std::invalid_argument("forward: feature rows differ from node count");
  if (x.cols != in_features_) throw std::invalid_argument("forward: feature width differs from model input width");

  std::map<std::string, Tensor> bound;
  for (const auto& ref : const_cast<Model*>(this)->params()) {
    Tensor b = tape.leaf(*ref.tensor);
    if (bound_out) bound_out->push_back(b);
    bound.emplace(ref.name, b);
  }
  auto at = [&](const std::string& name) -> const Tensor& {
    auto it = bound.find(name);
    if (it == bound.end()) throw std::logic_error("forward: parameter '" + name + "' not bound");
    return it->second;
  };
  auto opt = [&](const std::string& name) -> Tensor {
    auto it = bound.find(name);
    return it == bound.end() ? Tensor() : it->second;
  };
  auto breadth_at = [&](int t) {
    BreadthParams theta;
    theta.W = at(layer_key(t, "W"));
    theta.Ws = at(layer_key(t, "Ws"));
    theta.Wd = at(layer_key(t, "Wd"));
    theta.v = at(layer_key(t, "v"));
    theta.b = opt(layer_key(t, "b"));
    return theta;
  };
  auto gates_at = [&](int t) {
    DepthParams phi;
    phi.Wi = at(layer_key(t, "Wi"));
    phi.Wf = at(layer_key(t, "Wf"));
    phi.Wo = at(layer_key(t, "Wo"));
    phi.Wc = at(layer_key(t, "Wc"));
    phi.bi = opt(layer_key(t, "bi"));
    phi.bf = opt(layer_key(t, "bf"));
    phi.bo = opt(layer_key(t, "bo"));
    phi.bc = opt(layer_key(t, "bc"));
    return phi;
  };
  auto wrap = [&](const Tensor& out, const Tensor& prev, int t) {
    if (cfg_.residual == Residual::kConcat) {
      Tensor wr = at(layer_key(t, "Wr"));
      return residual_wrap(tape, out, prev, cfg_.residual, &wr);
    }
    return residual_wrap(tape, out, prev, cfg_.residual, nullptr);
  };
  auto note_alpha = [&](Tensor alpha) {
    if (!trace) return;
    alpha.node = -1;  // plain value; outlives the tape
    trace->attention.push_back(std::move(alpha));
  };

  const int n = g.num_nodes;
  const int k = cfg_.hidden;
  Tensor h = tape.matmul(x, at("embed.Wx"));
  if (cfg_.bias) h = tape.add_rowvec(h, at("embed.b"));

  Tensor final_h;
  switch (cfg_.variant) {
    case Variant::kGeniePath: {
      Tensor cur = h;
      Tensor memory = tape.constant(Tensor::zeros(n, k));
      for (int t = 0; t < cfg_.depth; ++t) {
        Tensor alpha;
        NodeState state{cur, memory, cur};
        NodeState next = geniepath_layer(tape, state, g, breadth_at(t), gates_at(t), &alpha);
        note_alpha(std::move(alpha));
        cur = wrap(next.H, cur, t);
        memory = next.C;
      }
      final_h = cur;
      break;
    }
    case Variant::kGeniePathLazy: {
      // Breadth stack first; the gate chain then walks the stacked
      // embeddings, pairing step t's embedding with the postponed state
      // from step t-1.
      std::vector<Tensor> stack{h};
      Tensor cur = h;
      for (int t = 0; t < cfg_.depth; ++t) {
        Tensor alpha;
        Tensor next = breadth_aggregate(tape, cur, g, breadth_at(t), &alpha);
        note_alpha(std::move(alpha));
        cur = wrap(next, cur, t);
        stack.push_back(cur);
      }
      Tensor mu = h;
      Tensor memory = tape.constant(Tensor::zeros(n, k));
      for (int t = 0; t < cfg_.depth; ++t) {
        auto [mu_next, c_next] = geniepath_lazy_update(tape, stack[t + 1], mu, memory, gates_at(t));
        mu = mu_next;
        memory = c_next;
      }
      final_h = mu;
      break;
    }
    case Variant::kGcn:
    case Variant::kGcnMean: {
      Tensor cur = h;
      for (int t = 0; t < cfg_.depth; ++t) {
        Tensor b;
        if (cfg_.bias) b = at(layer_key(t, "b"));
        Tensor next = gcn_layer(tape, cur, pg.adj, at(layer_key(t, "W")), Activation::kTanh,
                                cfg_.bias ? &b : nullptr);
        cur = wrap(next, cur, t);
      }
      final_h = cur;
      break;
    }
    case Variant::kBreadthOnly: {
      Tensor cur = h;
      for (int t = 0; t < cfg_.depth; ++t) {
        Tensor alpha;
        Tensor next = breadth_aggregate(tape, cur, g, breadth_at(t), &alpha);
        note_alpha(std::move(alpha));
        cur = wrap(next, cur, t);
      }
      final_h = cur;
      break;
    }
  }

  Tensor logits = tape.matmul(final_h, at("classifier.W"));
  if (cfg_.bias) logits = tape.add_rowvec(logits, at("classifier.b"));
  return logits;
}

Tensor masked_loss(Tape& tape, const Tensor& logits, const Labels& labels,
                   std::span<const std::uint8_t> mask, double l2_penalty,
                   std::span<const Tensor> l2_terms) {
  Tensor loss = labels.task == Task::kMultiClass
                    ? tape.masked_softmax_xent(logits, labels.class_index, mask)
                    : tape.masked_sigmoid_bce(logits, labels.bits, mask);
  if (l2_penalty > 0.0) {
    bool first = true;
    Tensor acc;
    for (const Tensor& w : l2_terms) {
      Tensor s = tape.sum_squares(w);
      acc = first ? s : tape.add(acc, s);
      first = false;
    }
    if (!first) loss = tape.add(loss, tape.scale(acc, l2_penalty));
  }
  return loss;
}

}  // namespace genie
