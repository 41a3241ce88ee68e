#include "genie/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace genie {

GradCheckResult grad_check(const LossAndGradFn& f, const std::vector<NamedParam>& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

  std::vector<Tensor> grads;
  const double base = f(&grads);
  if (f(nullptr) != base) throw std::runtime_error("grad_check: computation is not deterministic");
  if (grads.size() != params.size())
    throw std::invalid_argument("grad_check: gradient count differs from parameter count");

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].tensor;
    if (!same_shape(grads[p], t))
      throw std::invalid_argument("grad_check: gradient shape differs for " + params[p].name);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + eps;
      const double plus = f(nullptr);
      t.data[i] = saved - eps;
      const double minus = f(nullptr);
      t.data[i] = saved;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = grads[p].data[i];
      const double rel = std::fabs(analytic - numeric) / std::max(1.0, std::fabs(analytic));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = params[p].name;
        result.worst_index = static_cast<int>(i);
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace genie
