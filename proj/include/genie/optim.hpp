#pragma once

#include <vector>

#include "genie/model.hpp"
#include "genie/tensor.hpp"

namespace genie {

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moment estimates. Moments are allocated on the
/// first step and keyed by position, so the parameter list must stay stable
/// across steps.
class Adam {
 public:
  explicit Adam(const AdamConfig& cfg) : cfg_(cfg) {}

  /// Applies one update in place. grads must align with params; a non-finite
  /// gradient entry aborts with the parameter's name.
  void step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads);

  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace genie
