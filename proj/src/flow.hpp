#pragma once

// Latent-space solvers. Every solver minimises l(y, D(z, theta)) over z for a
// fixed decoder by following the gradient flow dz/dt = -alpha(t) grad_z l,
// starting from z(0) = 0 unless an explicit start is given.

#include "autodiff.hpp"
#include "common.hpp"
#include "loss.hpp"
#include "network.hpp"

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace gfe::flow {

enum class AlphaMode : std::uint8_t { exp_decay, unit };

struct FlowConfig {
  // Fixed-grid solvers.
  double tau = 5.0;
  int n_slices = 100;
  AlphaMode alpha_mode = AlphaMode::exp_decay;
  double grid_ratio = 100.0;  // last/first slice width ratio of the log grid
  // Nesterov.
  double eps = 1e-3;
  // AMD.
  double beta = 0.75;
  double s0 = 1.0;
  double s_max = 10.0;
  double kappa = 1.1;
  double conv_threshold = 0.01;
  int conv_window = 3;
  int max_steps = 100;
  int max_backtracks = 60;
  double amd_tau = 1000.0;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

std::string_view to_string(AlphaMode mode);
AlphaMode parse_alpha_mode(std::string_view name);

// exp_decay: e^(-2t/tau); unit: 1.
double alpha(double t, const FlowConfig& cfg);

// t_i = tau (c^(i/N) - 1) / (c - 1), c = cfg.grid_ratio. Slices widen
// geometrically away from t = 0 and the endpoints are exactly 0 and tau.
std::vector<double> make_log_grid(const FlowConfig& cfg);

/// l(y, D(z, theta)) as a function of z for one sample, with instrumentation.
///
/// `counter()` accumulates weight passes of everything evaluated through this
/// objective; `gradient_evals()` counts latent-gradient evaluations only.
class LatentObjective {
 public:
  LatentObjective(const Network& decoder, std::span<const double> target, LossKind loss);

  int dim() const { return decoder_->input_dim(); }
  const Network& decoder() const { return *decoder_; }
  const Vector& target() const { return target_; }
  LossKind loss_kind() const { return loss_; }

  ad::ComputationRecord record(const Vector& z);
  double loss(const Vector& z);
  double loss_and_grad(const Vector& z, Vector& grad);
  Vector grad(const Vector& z);

  ad::PassCounter& counter() { return counter_; }
  const ad::PassCounter& counter() const { return counter_; }
  std::uint64_t gradient_evals() const { return gradient_evals_; }
  void note_gradient_eval() { ++gradient_evals_; }

 private:
  const Network* decoder_;
  Vector target_;
  LossKind loss_;
  ad::PassCounter counter_;
  std::uint64_t gradient_evals_ = 0;
};

struct LatentState {
  Vector z;
  Vector v;  // Nesterov velocity; empty otherwise
  double t = 0.0;
};

// Forward-pass record consumed by the adjoint backward pass.
struct Trajectory {
  std::vector<double> times;       // t_0 = 0 < ... < t_N = tau
  std::vector<Vector> states;      // z(t_i), i = 0..N
  std::vector<Vector> velocities;  // v(t_i), Nesterov only
  std::vector<Vector> integrands;  // dz/dt at (t_i, z(t_i)), i = 0..N-1
  std::uint64_t param_checksum = 0;

  std::size_t slices() const { return times.empty() ? 0 : times.size() - 1; }
};

struct FlowSolution {
  Vector z_star;
  double final_loss = 0.0;
  Trajectory trajectory;
};

// Classical RK4 on the log grid, four gradient evaluations per slice.
// Throws DivergenceError naming the slice when the state becomes non-finite.
FlowSolution solve_fixed_rk4(LatentObjective& obj, const FlowConfig& cfg,
                             const Vector* z0 = nullptr);

// Damped second-order flow written as the first-order system
//   dv/dt = -(3 / (t + eps)) v - grad_z l,   dz/dt = v,   z(0) = v(0) = 0,
// integrated with RK4 on the same grid.
FlowSolution solve_nesterov(LatentObjective& obj, const FlowConfig& cfg,
                            const Vector* z0 = nullptr);

struct AdjointResult {
  Vector param_grad;  // total derivative d_theta l(y, D(z*, theta))
  Vector direct;      // partial_theta l at z*, latent held fixed
  Vector lambda_tau;  // adjoint at t = tau; equals -grad_z l(z*)
  Vector lambda_0;    // adjoint carried back to t = 0
};

// Total parameter gradient of l(y, D(z*(theta), theta)) through an RK4 solve.
//
// The adjoint lambda = -dl/dz(t) is carried backwards slice by slice using the
// exact adjoint of each RK4 step, so the result is the gradient of the discrete
// solver output. Stage states are rebuilt from the stored grid states and
// integrands; each stage then needs one Hessian-vector product (for lambda) and
// one mixed product (for the parameter integral), shared in one sweep.
// Throws UsageError if the trajectory was produced under different parameters.
AdjointResult adjoint_backward(LatentObjective& obj, const Trajectory& traj, const FlowConfig& cfg);

// partial_theta l(y, D(z*, theta)) with z* treated as a constant.
Vector approx_backward(LatentObjective& obj, const Vector& z_star);

struct AmdStep {
  LatentState state;  // z(t_{n+1}), t_{n+1}
  double dt = 0.0;
  double scale = 0.0;  // s_n
  int m = 0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool accepted = false;
};

// One adaptive step: s_n = min(max(kappa s_prev, s0), s_max, t_end - t), then
// the smallest m with l(z - beta^m s_n grad) < l(z) gives dt = beta^m s_n and
// z <- z - dt grad. Pass s_prev = 0 for the first step. A zero gradient, or no
// qualifying m within cfg.max_backtracks, returns accepted = false with the
// state unchanged.
AmdStep amd_step(LatentObjective& obj, const LatentState& state, double s_prev,
                 const FlowConfig& cfg, double t_end);

enum class AmdStop : std::uint8_t { stationary, slope, reached_tau, max_steps, backtrack_cap };
std::string_view to_string(AmdStop stop);

struct AmdSolution {
  Vector z_star;
  int steps = 0;
  double t_final = 0.0;
  std::vector<double> loss_curve;  // l(z_0), then after each accepted step
  std::vector<AmdStep> log;
  AmdStop stop = AmdStop::max_steps;
};

// Runs amd_step until the loss curve flattens (relative decrease over the last
// conv_window accepted steps below conv_threshold), t reaches amd_tau,
// max_steps is hit, or a step cannot decrease the loss.
AmdSolution solve_amd(LatentObjective& obj, const FlowConfig& cfg, const Vector* z0 = nullptr);

// One line per accepted step: "step t dt m loss".
void write_amd_diagnostics(const AmdSolution& sol, std::ostream& out);

}  // namespace gfe::flow
