#include "loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gfe {

namespace {

void check_sizes(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size())
    throw UsageError("loss: target has " + std::to_string(y.size()) +
                     " entries but reconstruction has " + std::to_string(yhat.size()));
  if (y.empty()) throw UsageError("loss: empty input");
}

bool clamped(double p) { return p < kBceClamp || p > 1.0 - kBceClamp; }

}  // namespace

double bce_loss(std::span<const double> y, std::span<const double> yhat) {
  check_sizes(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(yhat[i], kBceClamp, 1.0 - kBceClamp);
    sum -= y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
  }
  return sum / static_cast<double>(y.size());
}

double l2_loss(std::span<const double> y, std::span<const double> yhat) {
  check_sizes(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = yhat[i] - y[i];
    sum += d * d;
  }
  return sum;
}

double half_l2_loss(std::span<const double> y, std::span<const double> yhat) {
  return 0.5 * l2_loss(y, yhat);
}

double loss_value(LossKind kind, std::span<const double> y, std::span<const double> yhat) {
  switch (kind) {
    case LossKind::bce: return bce_loss(y, yhat);
    case LossKind::l2: return l2_loss(y, yhat);
    case LossKind::half_l2: return half_l2_loss(y, yhat);
  }
  throw UsageError("unknown loss kind");
}

Vector loss_gradient(LossKind kind, std::span<const double> y, std::span<const double> yhat) {
  check_sizes(y, yhat);
  const auto n = static_cast<Eigen::Index>(y.size());
  Vector g(n);
  switch (kind) {
    case LossKind::bce: {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = yhat[i];
        g[i] = clamped(p) ? 0.0 : inv_n * (p - y[i]) / (p * (1.0 - p));
      }
      break;
    }
    case LossKind::l2:
      for (Eigen::Index i = 0; i < n; ++i) g[i] = 2.0 * (yhat[i] - y[i]);
      break;
    case LossKind::half_l2:
      for (Eigen::Index i = 0; i < n; ++i) g[i] = yhat[i] - y[i];
      break;
  }
  return g;
}

Vector loss_hessian_diag(LossKind kind, std::span<const double> y, std::span<const double> yhat) {
  check_sizes(y, yhat);
  const auto n = static_cast<Eigen::Index>(y.size());
  switch (kind) {
    case LossKind::bce: {
      Vector h(n);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = yhat[i];
        h[i] = clamped(p) ? 0.0
                          : inv_n * (y[i] / (p * p) + (1.0 - y[i]) / ((1.0 - p) * (1.0 - p)));
      }
      return h;
    }
    case LossKind::l2: return Vector::Constant(n, 2.0);
    case LossKind::half_l2: return Vector::Ones(n);
  }
  throw UsageError("unknown loss kind");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bce: return "bce";
    case LossKind::l2: return "l2";
    case LossKind::half_l2: return "half_l2";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "bce") return LossKind::bce;
  if (name == "l2") return LossKind::l2;
  if (name == "half_l2") return LossKind::half_l2;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected bce, l2 or half_l2)");
}

}  // namespace gfe
