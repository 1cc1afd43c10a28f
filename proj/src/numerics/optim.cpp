#include "v2st/numerics/optim.hpp"

#include <cmath>
#include <string>

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

AdamState::AdamState(const ParamStore& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params.params()) {
    m_.emplace_back(p.var.value().size(), Real{0});
    v_.emplace_back(p.var.value().size(), Real{0});
  }
}

void adam_step(ParamStore& params, AdamState& state, double lr) {
  if (!(lr > 0)) throw ValidationError("adam_step: learning rate must be positive, got " + std::to_string(lr));
  const auto& list = params.params();
  if (list.size() != state.m_.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m_.size()) + " tensors, store has " +
                     std::to_string(list.size()));
  }
  for (const auto& p : list) {
    const auto g = p.var.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in parameter '" + p.name + "' at index " + std::to_string(i) +
                           " (value " + std::to_string(static_cast<double>(g[i])) + ")");
      }
    }
  }

  const auto& c = state.config_;
  const std::int64_t t = ++state.step_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  const Real b1 = static_cast<Real>(c.beta1), b2 = static_cast<Real>(c.beta2);
  for (std::size_t k = 0; k < list.size(); ++k) {
    Var var = list[k].var;
    Tensor& w = var.mutable_value();
    if (w.size() != state.m_[k].size()) throw ShapeError("adam_step: moment buffer shape drift for " + list[k].name);
    // A parameter that never received a gradient is treated as g = 0.
    const auto g = var.grad();
    const bool has_grad = !g.empty();
    auto& m = state.m_[k];
    auto& v = state.v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Real gi = has_grad ? g[i] : Real{0};
      m[i] = b1 * m[i] + (Real{1} - b1) * gi;
      v[i] = b2 * v[i] + (Real{1} - b2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= static_cast<Real>(lr * mhat / (std::sqrt(vhat) + c.epsilon));
    }
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double ss = 0;
  for (const auto& p : params.params())
    for (Real g : p.var.grad()) ss += static_cast<double>(g) * g;
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0) {
    const Real f = static_cast<Real>(max_norm / norm);
    for (auto& p : params.params()) {
      Var v = p.var;
      for (Real& g : v.mutable_grad()) g *= f;
    }
  }
  return norm;
}

}  // namespace v2st::inline V2ST_REAL_NS
