#include "flow.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

namespace gfe::flow {

void FlowConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("flow config: " + msg); };
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be > 0");
  if (n_slices < 2) fail("n_slices must be >= 2");
  if (!(grid_ratio > 1.0)) fail("grid_ratio must be > 1");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie in (0, 1)");
  if (!(s0 > 0.0)) fail("s0 must be > 0");
  if (!(s0 <= s_max)) fail("s0 must not exceed s_max");
  if (!(kappa >= 1.0)) fail("kappa must be >= 1");
  if (!(conv_threshold >= 0.0)) fail("conv_threshold must be >= 0");
  if (conv_window < 1) fail("conv_window must be >= 1");
  if (max_steps < 1) fail("max_steps must be >= 1");
  if (max_backtracks < 0) fail("max_backtracks must be >= 0");
  if (!(amd_tau > 0.0)) fail("amd_tau must be > 0");
}

std::string_view to_string(AlphaMode mode) {
  return mode == AlphaMode::exp_decay ? "exp_decay" : "unit";
}

AlphaMode parse_alpha_mode(std::string_view name) {
  if (name == "exp_decay") return AlphaMode::exp_decay;
  if (name == "unit") return AlphaMode::unit;
  throw ConfigError("unknown alpha mode '" + std::string(name) + "' (expected exp_decay or unit)");
}

double alpha(double t, const FlowConfig& cfg) {
  return cfg.alpha_mode == AlphaMode::unit ? 1.0 : std::exp(-2.0 * t / cfg.tau);
}

std::vector<double> make_log_grid(const FlowConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_slices;
  const double c = cfg.grid_ratio;
  std::vector<double> t(static_cast<std::size_t>(n) + 1);
  t.front() = 0.0;
  for (int i = 1; i < n; ++i)
    t[static_cast<std::size_t>(i)] =
        cfg.tau * (std::pow(c, static_cast<double>(i) / n) - 1.0) / (c - 1.0);
  t.back() = cfg.tau;
  return t;
}

LatentObjective::LatentObjective(const Network& decoder, std::span<const double> target,
                                 LossKind loss)
    : decoder_(&decoder), target_(as_vector(target)), loss_(loss) {
  if (static_cast<int>(target.size()) != decoder.output_dim())
    throw UsageError("objective: target has " + std::to_string(target.size()) +
                     " entries, decoder output has " + std::to_string(decoder.output_dim()));
}

ad::ComputationRecord LatentObjective::record(const Vector& z) {
  ad::ComputationRecord rec(*decoder_, &counter_);
  rec.run(as_span(z), as_span(target_), loss_);
  return rec;
}

double LatentObjective::loss(const Vector& z) { return record(z).loss(); }

double LatentObjective::loss_and_grad(const Vector& z, Vector& grad) {
  auto rec = record(z);
  grad = ad::grad_wrt_latent(rec);
  ++gradient_evals_;
  return rec.loss();
}

Vector LatentObjective::grad(const Vector& z) {
  Vector g;
  loss_and_grad(z, g);
  return g;
}

namespace {

constexpr double kStageOffset[4] = {0.0, 0.5, 0.5, 1.0};

void check_start(const LatentObjective& obj, const Vector* z0) {
  if (z0 && z0->size() != obj.dim())
    throw UsageError("initial latent has " + std::to_string(z0->size()) + " entries, expected " +
                     std::to_string(obj.dim()));
}

Vector start_state(const LatentObjective& obj, const Vector* z0) {
  return z0 ? *z0 : Vector::Zero(obj.dim());
}

// f(t, z) = -alpha(t) grad_z l
Vector flow_rhs(LatentObjective& obj, const FlowConfig& cfg, double t, const Vector& z) {
  return -alpha(t, cfg) * obj.grad(z);
}

}  // namespace

FlowSolution solve_fixed_rk4(LatentObjective& obj, const FlowConfig& cfg, const Vector* z0) {
  check_start(obj, z0);
  const auto grid = make_log_grid(cfg);
  FlowSolution sol;
  auto& traj = sol.trajectory;
  traj.times = grid;
  traj.param_checksum = obj.decoder().checksum();

  Vector z = start_state(obj, z0);
  traj.states.push_back(z);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i];
    const double h = grid[i + 1] - t;
    const Vector k1 = flow_rhs(obj, cfg, t, z);
    const Vector k2 = flow_rhs(obj, cfg, t + 0.5 * h, z + 0.5 * h * k1);
    const Vector k3 = flow_rhs(obj, cfg, t + 0.5 * h, z + 0.5 * h * k2);
    const Vector k4 = flow_rhs(obj, cfg, t + h, z + h * k3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite())
      throw DivergenceError("fixed-grid gradient flow produced a non-finite latent",
                            static_cast<int>(i));
    traj.integrands.push_back(k1);
    traj.states.push_back(z);
  }
  sol.z_star = z;
  sol.final_loss = obj.loss(z);
  return sol;
}

FlowSolution solve_nesterov(LatentObjective& obj, const FlowConfig& cfg, const Vector* z0) {
  check_start(obj, z0);
  const auto grid = make_log_grid(cfg);
  FlowSolution sol;
  auto& traj = sol.trajectory;
  traj.times = grid;
  traj.param_checksum = obj.decoder().checksum();

  // dv/dt = -(3/(t+eps)) v - grad l(z)
  auto accel = [&](double t, const Vector& z, const Vector& v) -> Vector {
    return -(3.0 / (t + cfg.eps)) * v - obj.grad(z);
  };

  Vector z = start_state(obj, z0);
  Vector v = Vector::Zero(obj.dim());
  traj.states.push_back(z);
  traj.velocities.push_back(v);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i];
    const double h = grid[i + 1] - t;
    const Vector kz1 = v;
    const Vector kv1 = accel(t, z, v);
    const Vector kz2 = v + 0.5 * h * kv1;
    const Vector kv2 = accel(t + 0.5 * h, z + 0.5 * h * kz1, kz2);
    const Vector kz3 = v + 0.5 * h * kv2;
    const Vector kv3 = accel(t + 0.5 * h, z + 0.5 * h * kz2, kz3);
    const Vector kz4 = v + h * kv3;
    const Vector kv4 = accel(t + h, z + h * kz3, kz4);
    z += (h / 6.0) * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4);
    v += (h / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4);
    if (!z.allFinite() || !v.allFinite())
      throw DivergenceError("second-order flow produced a non-finite state", static_cast<int>(i));
    traj.integrands.push_back(kz1);
    traj.states.push_back(z);
    traj.velocities.push_back(v);
  }
  sol.z_star = z;
  sol.final_loss = obj.loss(z);
  return sol;
}

AdjointResult adjoint_backward(LatentObjective& obj, const Trajectory& traj,
                               const FlowConfig& cfg) {
  if (traj.param_checksum != obj.decoder().checksum())
    throw UsageError("adjoint_backward: trajectory was recorded under different decoder parameters");
  const std::size_t n = traj.slices();
  if (n == 0 || traj.states.size() != n + 1 || traj.integrands.size() != n)
    throw UsageError("adjoint_backward: malformed trajectory");
  if (!traj.velocities.empty())
    throw UsageError("adjoint_backward: trajectory comes from the second-order solver");

  AdjointResult res;
  auto end = obj.record(traj.states.back());
  const Vector dl_dz = ad::grad_wrt_latent(end);
  res.direct = ad::grad_wrt_params(end);
  res.lambda_tau = -dl_dz;

  // a = dl/dz(t_i), carried from t_N down to t_0.
  Vector a = dl_dz;
  Vector theta_bar = Vector::Zero(static_cast<Eigen::Index>(obj.decoder().param_count()));
  const double w_a[4] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};

  for (std::size_t i = n; i-- > 0;) {
    const double t = traj.times[i];
    const double h = traj.times[i + 1] - t;
    const Vector& z = traj.states[i];

    // Rebuild the stage states Z_j of this RK4 step.
    Vector stage[4];
    stage[0] = z;
    stage[1] = z + 0.5 * h * traj.integrands[i];
    const Vector k2 = flow_rhs(obj, cfg, t + 0.5 * h, stage[1]);
    stage[2] = z + 0.5 * h * k2;
    const Vector k3 = flow_rhs(obj, cfg, t + 0.5 * h, stage[2]);
    stage[3] = z + h * k3;

    // Reverse through the step. kbar_j = dL/dk_j, zbar_j = J_j^T kbar_j with
    // J_j = -alpha_j grad^2 l(Z_j).
    Vector zbar_next;  // zbar of the stage above
    Vector a_prev = a;
    for (int j = 3; j >= 0; --j) {
      Vector kbar = h * w_a[j] * a;
      // Stage j+1 is z + c h k_j with c = 1/2, 1/2, 1.
      if (j == 2) kbar += h * zbar_next;
      else if (j < 2) kbar += 0.5 * h * zbar_next;
      const double al = alpha(t + kStageOffset[j] * h, cfg);
      auto rec = obj.record(stage[j]);
      auto so = ad::second_order(rec, kbar, true, true);
      Vector zbar = -al * so.hvp;
      theta_bar -= al * so.mixed;
      a_prev += zbar;
      zbar_next = std::move(zbar);
    }
    a = std::move(a_prev);
    if (!a.allFinite())
      throw DivergenceError("adjoint backward pass produced a non-finite adjoint",
                            static_cast<int>(i));
  }

  res.lambda_0 = -a;
  res.param_grad = res.direct + theta_bar;
  return res;
}

Vector approx_backward(LatentObjective& obj, const Vector& z_star) {
  auto rec = obj.record(z_star);
  return ad::grad_wrt_params(rec);
}

namespace {

struct StepOutcome {
  AmdStep step;
  std::optional<ad::ComputationRecord> accepted_record;
};

StepOutcome amd_step_impl(LatentObjective& obj, const LatentState& state, double loss0,
                          const Vector& grad, double s_prev, const FlowConfig& cfg, double t_end) {
  StepOutcome out;
  AmdStep& st = out.step;
  st.state = state;
  st.loss_before = loss0;
  st.loss_after = loss0;
  const double s_hat = std::max(cfg.kappa * s_prev, cfg.s0);
  st.scale = std::min(s_hat, cfg.s_max);
  const double remaining = t_end - state.t;
  if (!(remaining > 0.0) || !grad.allFinite() || grad.isZero(0.0)) return out;
  const double s = std::min(st.scale, remaining);

  double dt = s;
  for (int m = 0; m <= cfg.max_backtracks; ++m, dt *= cfg.beta) {
    Vector trial = state.z - dt * grad;
    auto rec = obj.record(trial);
    const double l = rec.loss();
    if (l < loss0) {
      st.state.z = std::move(trial);
      st.state.t = m == 0 && s == remaining ? t_end : state.t + dt;
      st.dt = dt;
      st.m = m;
      st.loss_after = l;
      st.accepted = true;
      out.accepted_record.emplace(std::move(rec));
      return out;
    }
  }
  return out;
}

}  // namespace

AmdStep amd_step(LatentObjective& obj, const LatentState& state, double s_prev,
                 const FlowConfig& cfg, double t_end) {
  if (state.z.size() != obj.dim()) throw UsageError("amd_step: latent size mismatch");
  Vector grad;
  const double l0 = obj.loss_and_grad(state.z, grad);
  return amd_step_impl(obj, state, l0, grad, s_prev, cfg, t_end).step;
}

std::string_view to_string(AmdStop stop) {
  switch (stop) {
    case AmdStop::stationary: return "stationary";
    case AmdStop::slope: return "slope";
    case AmdStop::reached_tau: return "reached_tau";
    case AmdStop::max_steps: return "max_steps";
    case AmdStop::backtrack_cap: return "backtrack_cap";
  }
  return "?";
}

AmdSolution solve_amd(LatentObjective& obj, const FlowConfig& cfg, const Vector* z0) {
  cfg.validate();
  check_start(obj, z0);
  AmdSolution sol;
  LatentState state{start_state(obj, z0), Vector(), 0.0};
  if (!state.z.allFinite()) throw UsageError("solve_amd: non-finite initial latent");

  auto rec = obj.record(state.z);
  double loss = rec.loss();
  if (!std::isfinite(loss)) throw UsageError("solve_amd: non-finite loss at the initial latent");
  Vector grad = ad::grad_wrt_latent(rec);
  obj.note_gradient_eval();
  sol.loss_curve.push_back(loss);

  double s_prev = 0.0;
  sol.stop = AmdStop::max_steps;
  while (sol.steps < cfg.max_steps) {
    if (grad.isZero(0.0)) {
      sol.stop = AmdStop::stationary;
      break;
    }
    if (state.t >= cfg.amd_tau) {
      sol.stop = AmdStop::reached_tau;
      break;
    }
    auto out = amd_step_impl(obj, state, loss, grad, s_prev, cfg, cfg.amd_tau);
    if (!out.step.accepted) {
      sol.stop = AmdStop::backtrack_cap;
      break;
    }
    state = out.step.state;
    loss = out.step.loss_after;
    s_prev = out.step.scale;
    sol.log.push_back(out.step);
    sol.loss_curve.push_back(loss);
    ++sol.steps;

    const auto w = static_cast<std::size_t>(cfg.conv_window);
    if (sol.loss_curve.size() > w) {
      const double before = sol.loss_curve[sol.loss_curve.size() - 1 - w];
      const double rel = (before - loss) / std::max(std::abs(before), 1e-300);
      if (rel < cfg.conv_threshold) {
        sol.stop = AmdStop::slope;
        break;
      }
    }
    if (state.t >= cfg.amd_tau) {
      sol.stop = AmdStop::reached_tau;
      break;
    }
    if (sol.steps >= cfg.max_steps) break;
    grad = ad::grad_wrt_latent(*out.accepted_record);
    obj.note_gradient_eval();
  }
  sol.z_star = state.z;
  sol.t_final = state.t;
  return sol;
}

void write_amd_diagnostics(const AmdSolution& sol, std::ostream& out) {
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < sol.log.size(); ++i) {
    const auto& s = sol.log[i];
    out << i + 1 << ' ' << s.state.t << ' ' << s.dt << ' ' << s.m << ' ' << s.loss_after << '\n';
  }
  out.precision(old);
}

}  // namespace gfe::flow
