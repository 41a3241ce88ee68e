#pragma once

#include <functional>
#include <string>
#include <vector>

#include "genie/tensor.hpp"

namespace genie {

/// A named parameter entry the checker may perturb in place.
struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Re-runnable forward pass. Returns the scalar loss; when grads_out is
/// non-null, fills one gradient tensor per parameter (same order as the
/// params list given to grad_check).
using LossAndGradFn = std::function<double(std::vector<Tensor>* grads_out)>;

/// Central finite-difference check of every parameter entry:
///   error = |analytic - (f(p+eps) - f(p-eps)) / (2 eps)| / max(1, |analytic|)
/// f is evaluated twice at the base point first; any mismatch means f is not
/// deterministic and the check aborts.
GradCheckResult grad_check(const LossAndGradFn& f, const std::vector<NamedParam>& params, double eps);

}  // namespace genie
