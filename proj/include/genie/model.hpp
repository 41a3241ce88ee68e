#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genie/dataset.hpp"
#include "genie/graph.hpp"
#include "genie/layers.hpp"
#include "genie/tape.hpp"
#include "genie/tensor.hpp"

namespace genie {

enum class Variant { kGeniePath, kGeniePathLazy, kGcn, kGcnMean, kBreadthOnly };

Variant parse_variant(const std::string& s);
std::string variant_name(Variant v);
Residual parse_residual(const std::string& s);  // "none" | "add" | "concat"
std::string residual_name(Residual r);

struct ModelConfig {
  Variant variant = Variant::kGeniePath;
  int depth = 2;    // stacked layers T
  int hidden = 16;  // embedding width K
  Residual residual = Residual::kNone;
  bool bias = false;  // opt-in bias terms on every linear map
  Task task = Task::kMultiClass;
  double lr = 0.005;
  double l2_penalty = 0.0;
  int epochs = 1000;
  int patience = 50;  // early-stopping window on the validation metric
  std::uint64_t seed = 1;
};

/// Named view of one parameter tensor. weight_matrix marks the tensors the
/// l2 penalty applies to (projection matrices, not attention vectors or
/// biases).
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
  bool weight_matrix = false;
};

/// Optional forward-pass byproducts: per-layer edge attention weights,
/// aligned with the self-looped graph's edge order.
struct ForwardTrace {
  std::vector<Tensor> attention;
};

///// Per-block graph preprocessing: every variant works on the self-looped
/// graph; the convolution variants additionally need normalized edge
/// weights.
struct PreparedGraph {
  Graph looped;
  NormalizedAdjacency adj;  // filled for kGcn / kGcnMean only
};

class Model {
 public:
  /// Allocates and initializes all parameters from cfg.seed: Glorot-uniform
  /// weight matrices, zero attention vectors (training starts from uniform
  /// attention), zero biases.
  Model(const ModelConfig& cfg, int in_features, int num_classes);

  const ModelConfig& config() const { return cfg_; }
  int in_features() const { return in_features_; }
  int num_classes() const { return num_classes_; }

  /// Stable-order named views of every parameter.
  std::vector<ParamRef> params();
  /// Deep copy of the current parameter values, in params() order.
  std::vector<std::pair<std::string, Tensor>> state() const;
  /// Replaces all parameters; every name must match an existing parameter
  /// of the same shape, each exactly once.
  void load_state(std::span<const std::pair<std::string, Tensor>> state);

  PreparedGraph prepare(const Graph& raw) const;

  /// Binds every parameter onto the tape (in params() order, exposed via
  /// bound_out) and runs the variant's forward pass. Returns N x C logits.
  Tensor forward(Tape& tape, const PreparedGraph& pg, const Tensor& x,
                 std::vector<Tensor>* bound_out = nullptr, ForwardTrace* trace = nullptr) const;

 private:
  ModelConfig cfg_;
  int in_features_ = 0;
  int num_classes_ = 0;

  Tensor wx_, bx_;                       // input embedding P x K (+ 1 x K)
  std::vector<BreadthParams> breadth_;   // attention variants, per layer
  std::vector<DepthParams> gates_;       // gated variants, per layer
  std::vector<Tensor> gcn_w_, gcn_b_;    // convolution variants, per layer
  std::vector<Tensor> res_proj_;         // concat-residual projections, per layer
  Tensor cls_w_, cls_b_;                 // classifier K x C (+ 1 x C)
};

/// Mean masked data loss for the task plus l2_penalty * sum of squared
/// entries of every tensor in l2_terms (pass the bound weight matrices).
Tensor masked_loss(Tape& tape, const Tensor& logits, const Labels& labels,
                   std::span<const std::uint8_t> mask, double l2_penalty,
                   std::span<const Tensor> l2_terms);

}  // namespace genie
