#include "selfcheck.hpp"

#include "autodiff.hpp"
#include "flow.hpp"
#include "model.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace gfe {

namespace {

double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Network random_net(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(1, 5);
  const int depth = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<int> w(static_cast<std::size_t>(depth) + 1);
  for (auto& x : w) x = width(rng);
  auto net = make_decoder(w);
  init_params(net, rng());
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < net.params().size(); ++i) net.params()[i] += n(rng);
  return net;
}

Vector random_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double loss_at(const Network& net, const Vector& z, const Vector& y, LossKind k) {
  ad::ComputationRecord r(net);
  return r.run(as_span(z), as_span(y), k);
}

CheckResult derivative_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double h = 1e-5;
  double first = 0.0, second = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Network net = random_net(rng);
    const Vector z = random_vec(rng, net.input_dim(), -1, 1);
    const Vector y = random_vec(rng, net.output_dim(), 0.05, 0.95);
    const Vector lam = random_vec(rng, net.input_dim(), -1, 1);
    ad::ComputationRecord rec(net);
    rec.run(as_span(z), as_span(y), LossKind::bce);
    const Vector gz = ad::grad_wrt_latent(rec);
    const Vector gp = ad::grad_wrt_params(rec);
    const auto so = ad::second_order(rec, lam, true, true);

    Vector fz(z.size()), fh(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Vector zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      fz[i] = (loss_at(net, zp, y, LossKind::bce) - loss_at(net, zm, y, LossKind::bce)) / (2 * h);
      ad::ComputationRecord rp(net), rm(net);
      rp.run(as_span(zp), as_span(y), LossKind::bce);
      rm.run(as_span(zm), as_span(y), LossKind::bce);
      fh[i] = lam.dot(ad::grad_wrt_latent(rp) - ad::grad_wrt_latent(rm)) / (2 * h);
    }
    Network work = net;
    Vector fp(gp.size()), fm(gp.size());
    for (Eigen::Index i = 0; i < gp.size(); ++i) {
      const double keep = work.params()[i];
      work.params()[i] = keep + h;
      ad::ComputationRecord rp(work);
      const double lp = rp.run(as_span(z), as_span(y), LossKind::bce);
      const double mp = lam.dot(ad::grad_wrt_latent(rp));
      work.params()[i] = keep - h;
      ad::ComputationRecord rm(work);
      const double lm = rm.run(as_span(z), as_span(y), LossKind::bce);
      const double mm = lam.dot(ad::grad_wrt_latent(rm));
      work.params()[i] = keep;
      fp[i] = (lp - lm) / (2 * h);
      fm[i] = (mp - mm) / (2 * h);
    }
    first = std::max({first, rel_err(gz, fz), rel_err(gp, fp)});
    second = std::max({second, rel_err(so.hvp, fh), rel_err(so.mixed, fm)});
  }
  return {"derivatives", first < 1e-5 && second < 1e-4,
          "first-order " + fmt("%.2e", first) + ", second-order " + fmt("%.2e", second)};
}

CheckResult adjoint_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xadull);
  Network net = make_decoder({2, 4, 8});
  init_params(net, rng());
  const Vector y = random_vec(rng, 8, 0.05, 0.95);
  flow::FlowConfig cfg;
  cfg.n_slices = 50;
  auto solve_loss = [&](const Network& d) {
    flow::LatentObjective o(d, as_span(y), LossKind::bce);
    return flow::solve_fixed_rk4(o, cfg).final_loss;
  };
  flow::LatentObjective obj(net, as_span(y), LossKind::bce);
  const auto sol = flow::solve_fixed_rk4(obj, cfg);
  const Vector g = flow::adjoint_backward(obj, sol.trajectory, cfg).param_grad;
  Network work = net;
  Vector fd(g.size());
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double keep = work.params()[i];
    work.params()[i] = keep + h;
    const double lp = solve_loss(work);
    work.params()[i] = keep - h;
    const double lm = solve_loss(work);
    work.params()[i] = keep;
    fd[i] = (lp - lm) / (2 * h);
  }
  const double e = rel_err(g, fd);
  return {"adjoint", e < 1e-3, "relative error " + fmt("%.2e", e)};
}

CheckResult amd_identity_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x1dull);
  const Network net = Network::identity(6);
  const Vector y = random_vec(rng, 6, -2, 2);
  flow::LatentObjective obj(net, as_span(y), LossKind::half_l2);
  flow::FlowConfig cfg;
  const auto sol = flow::solve_amd(obj, cfg);
  const double dist = (sol.z_star - y).norm();
  return {"amd-identity", dist < 1e-6 && sol.steps <= 5,
          "distance " + fmt("%.2e", dist) + " after " + std::to_string(sol.steps) + " steps"};
}

}  // namespace

std::vector<CheckResult> run_self_checks(std::uint64_t seed) {
  return {derivative_check(seed), adjoint_check(seed), amd_identity_check(seed)};
}

}  // namespace gfe
