#include "optim.hpp"

#include <cmath>
#include <string>

namespace gfe {

OptimizerState OptimizerState::create(const OptimizerHyper& hyper, std::size_t n_params) {
  OptimizerState s;
  s.hyper = hyper;
  const auto n = static_cast<Eigen::Index>(n_params);
  s.second_moment = Vector::Zero(n);
  if (hyper.kind == OptimizerKind::adam) s.first_moment = Vector::Zero(n);
  return s;
}

namespace {

void check(const Vector& theta, const Vector& grad, const OptimizerState& state) {
  if (theta.size() != grad.size() || static_cast<std::size_t>(theta.size()) != state.size())
    throw UsageError("optimizer: parameter, gradient and state sizes differ (" +
                     std::to_string(theta.size()) + ", " + std::to_string(grad.size()) + ", " +
                     std::to_string(state.size()) + ")");
  if (!grad.allFinite()) {
    Eigen::Index bad = 0;
    while (bad < grad.size() && std::isfinite(grad[bad])) ++bad;
    throw UsageError("optimizer: non-finite gradient entry at index " + std::to_string(bad) +
                     "; update rejected");
  }
}

}  // namespace

void rmsprop_update(Vector& theta, const Vector& grad, OptimizerState& state) {
  check(theta, grad, state);
  const auto& h = state.hyper;
  auto& v = state.second_moment;
  v = h.rms_alpha * v + (1.0 - h.rms_alpha) * grad.cwiseAbs2();
  theta.array() -= h.lr * grad.array() / (v.array().sqrt() + h.rms_eps);
  ++state.step;
}

void adam_update(Vector& theta, const Vector& grad, OptimizerState& state) {
  check(theta, grad, state);
  if (state.first_moment.size() != grad.size()) throw UsageError("adam: missing first moment");
  const auto& h = state.hyper;
  ++state.step;
  auto& m = state.first_moment;
  auto& v = state.second_moment;
  m = h.beta1 * m + (1.0 - h.beta1) * grad;
  v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  theta.array() -= h.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + h.adam_eps);
}

void apply_update(Vector& theta, const Vector& grad, OptimizerState& state) {
  switch (state.hyper.kind) {
    case OptimizerKind::rmsprop: return rmsprop_update(theta, grad, state);
    case OptimizerKind::adam: return adam_update(theta, grad, state);
  }
  throw UsageError("unknown optimizer kind");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "rmsprop";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "rmsprop") return OptimizerKind::rmsprop;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected adam or rmsprop)");
}

}  // namespace gfe
