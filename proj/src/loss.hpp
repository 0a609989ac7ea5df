#pragma once

#include "common.hpp"

#include <cstdint>
#include <string_view>

namespace gfe {

// bce: per-pixel Bernoulli cross-entropy averaged over pixels.
// l2: squared Euclidean distance. half_l2: half of it (used by analytic fixtures).
enum class LossKind : std::uint8_t { bce = 0, l2 = 1, half_l2 = 2 };

inline constexpr double kBceClamp = 1e-12;

double bce_loss(std::span<const double> y, std::span<const double> yhat);
double l2_loss(std::span<const double> y, std::span<const double> yhat);
double half_l2_loss(std::span<const double> y, std::span<const double> yhat);

double loss_value(LossKind kind, std::span<const double> y, std::span<const double> yhat);
// d loss / d yhat.
Vector loss_gradient(LossKind kind, std::span<const double> y, std::span<const double> yhat);
// Diagonal of d^2 loss / d yhat^2 (all three losses are separable).
Vector loss_hessian_diag(LossKind kind, std::span<const double> y, std::span<const double> yhat);

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

}  // namespace gfe
