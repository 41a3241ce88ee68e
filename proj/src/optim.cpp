#include "genie/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace genie {

void Adam::step(const std::vector<ParamRef>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam: gradient count differs from parameter count");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor->rows, p.tensor->cols);
      v_.emplace_back(p.tensor->rows, p.tensor->cols);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter list changed between steps");

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(*params[i].tensor, grads[i]))
      throw std::invalid_argument("adam: gradient shape differs for " + params[i].name);
    for (double gx : grads[i].data)
      if (!std::isfinite(gx))
        throw std::runtime_error("adam: non-finite gradient for " + params[i].name);
  }

  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      m_[i].data[j] = cfg_.beta1 * m_[i].data[j] + (1.0 - cfg_.beta1) * g.data[j];
      v_[i].data[j] = cfg_.beta2 * v_[i].data[j] + (1.0 - cfg_.beta2) * g.data[j] * g.data[j];
      const double m_hat = m_[i].data[j] / c1;
      const double v_hat = v_[i].data[j] / c2;
      p.data[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace genie
