#pragma once

#include "common.hpp"

#include <cstdint>
#include <string_view>

namespace gfe {

enum class OptimizerKind : std::uint8_t { rmsprop = 1, adam = 2 };

struct OptimizerHyper {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 0.0005;
  // RMSprop
  double rms_alpha = 0.9;
  double rms_eps = 1e-6;
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct OptimizerState {
  OptimizerHyper hyper;
  std::uint64_t step = 0;
  Vector first_moment;   // Adam only
  Vector second_moment;  // RMSprop running square / Adam second moment

  static OptimizerState create(const OptimizerHyper& hyper, std::size_t n_params);
  std::size_t size() const { return static_cast<std::size_t>(second_moment.size()); }
};

// v <- a v + (1-a) g^2;  theta <- theta - lr g / (sqrt(v) + eps)
void rmsprop_update(Vector& theta, const Vector& grad, OptimizerState& state);
// Bias-corrected Adam.
void adam_update(Vector& theta, const Vector& grad, OptimizerState& state);
// Dispatches on state.hyper.kind. Rejects (throws UsageError, leaves theta and
// state untouched) on shape mismatch or a non-finite gradient.
void apply_update(Vector& theta, const Vector& grad, OptimizerState& state);

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

}  // namespace gfe
