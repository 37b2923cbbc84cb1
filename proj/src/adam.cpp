#include "srgf/adam.hpp"

#include <cmath>
#include <string>

namespace srgf {

void adam_step(AdamState& state, std::vector<Matrix*> params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty() && state.step == 0) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: moment buffers do not match parameter count");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k]) || !params[k]->same_shape(state.first_moment[k]) ||
        !params[k]->same_shape(state.second_moment[k])) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(k) + " (" +
                       shape_string(*params[k]) + " vs gradient " + shape_string(grads[k]) + ")");
    }
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->values();
    const auto& g = grads[k].values();
    auto& m = state.first_moment[k].values();
    auto& v = state.second_moment[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace srgf
