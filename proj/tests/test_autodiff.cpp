#include "autodiff.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace gfe {
namespace {

using testing::random_decoder;
using testing::random_vector;
using testing::ref_objective;
using testing::rel_err;

constexpr double kH = 1e-5;

Vector fd_latent(const Network& net, const Vector& z, const Vector& y, LossKind k) {
  Vector g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vector zp = z, zm = z;
    zp[i] += kH;
    zm[i] -= kH;
    g[i] = (ref_objective(net, zp, y, k) - ref_objective(net, zm, y, k)) / (2 * kH);
  }
  return g;
}

Vector fd_params(Network net, const Vector& z, const Vector& y, LossKind k) {
  Vector g(net.params().size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + kH;
    const double lp = ref_objective(net, z, y, k);
    net.params()[i] = keep - kH;
    const double lm = ref_objective(net, z, y, k);
    net.params()[i] = keep;
    g[i] = (lp - lm) / (2 * kH);
  }
  return g;
}

Vector latent_grad(const Network& net, const Vector& z, const Vector& y, LossKind k) {
  ad::ComputationRecord r(net);
  r.run(as_span(z), as_span(y), k);
  return ad::grad_wrt_latent(r);
}

Vector target_for(std::mt19937_64& rng, int n, LossKind k) {
  return k == LossKind::bce ? random_vector(rng, n, 0.05, 0.95) : random_vector(rng, n, -0.5, 1.5);
}

class AutodiffLoss : public ::testing::TestWithParam<LossKind> {};

TEST_P(AutodiffLoss, FirstOrderMatchesFiniteDifferences) {
  const LossKind k = GetParam();
  std::mt19937_64 rng(11 + static_cast<int>(k));
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = random_decoder(rng);
    const Vector z = random_vector(rng, net.input_dim(), -1, 1);
    const Vector y = target_for(rng, net.output_dim(), k);
    ad::ComputationRecord rec(net);
    rec.run(as_span(z), as_span(y), k);
    EXPECT_LT(rel_err(ad::grad_wrt_latent(rec), fd_latent(net, z, y, k)), 1e-5) << trial;
    EXPECT_LT(rel_err(ad::grad_wrt_params(rec), fd_params(net, z, y, k)), 1e-5) << trial;
  }
}

TEST_P(AutodiffLoss, SecondOrderMatchesFiniteDifferences) {
  const LossKind k = GetParam();
  std::mt19937_64 rng(23 + static_cast<int>(k));
  for (int trial = 0; trial < 40; ++trial) {
    const Network net = random_decoder(rng);
    const Vector z = random_vector(rng, net.input_dim(), -1, 1);
    const Vector y = target_for(rng, net.output_dim(), k);
    const Vector lam = random_vector(rng, net.input_dim(), -1, 1);
    ad::ComputationRecord rec(net);
    rec.run(as_span(z), as_span(y), k);

    Vector hv(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Vector zp = z, zm = z;
      zp[i] += kH;
      zm[i] -= kH;
      hv[i] = lam.dot(latent_grad(net, zp, y, k) - latent_grad(net, zm, y, k)) / (2 * kH);
    }
    Network work = net;
    Vector mixed(net.params().size());
    for (Eigen::Index i = 0; i < mixed.size(); ++i) {
      const double keep = work.params()[i];
      work.params()[i] = keep + kH;
      const double gp = lam.dot(latent_grad(work, z, y, k));
      work.params()[i] = keep - kH;
      const double gm = lam.dot(latent_grad(work, z, y, k));
      work.params()[i] = keep;
      mixed[i] = (gp - gm) / (2 * kH);
    }
    EXPECT_LT(rel_err(ad::hessian_vector_latent(rec, lam), hv), 1e-4) << trial;
    EXPECT_LT(rel_err(ad::mixed_grad_params(rec, lam), mixed), 1e-4) << trial;

    const auto both = ad::second_order(rec, lam, true, true);
    EXPECT_LT(rel_err(both.hvp, ad::hessian_vector_latent(rec, lam)), 1e-14);
    EXPECT_LT(rel_err(both.mixed, ad::mixed_grad_params(rec, lam)), 1e-14);
  }
}

INSTANTIATE_TEST_SUITE_P(Losses, AutodiffLoss,
                         ::testing::Values(LossKind::bce, LossKind::l2, LossKind::half_l2));

TEST(Autodiff, ForwardMatchesReferenceEvaluator) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_decoder(rng);
    const Vector z = random_vector(rng, net.input_dim(), -2, 2);
    ad::ComputationRecord rec(net);
    rec.run(as_span(z));
    const auto ref = testing::ref_forward(net, testing::to_std(z));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(rec.output()[i], ref[i], 1e-14);
    EXPECT_EQ(rec.values().front(), z);
    EXPECT_FALSE(rec.has_loss());
  }
}

TEST(Autodiff, VjpMatchesLossGradientChain) {
  std::mt19937_64 rng(5);
  const Network net = random_decoder(rng);
  const Vector z = random_vector(rng, net.input_dim(), -1, 1);
  const Vector y = random_vector(rng, net.output_dim(), 0.1, 0.9);
  ad::ComputationRecord with_loss(net);
  with_loss.run(as_span(z), as_span(y), LossKind::bce);
  ad::ComputationRecord plain(net);
  plain.run(as_span(z));
  const Vector cot = loss_gradient(LossKind::bce, as_span(y), as_span(plain.output()));
  const auto bp = ad::vjp(plain, cot, true, true);
  EXPECT_LT(rel_err(bp.input, ad::grad_wrt_latent(with_loss)), 1e-14);
  EXPECT_LT(rel_err(bp.params, ad::grad_wrt_params(with_loss)), 1e-14);
}

TEST(Autodiff, SeedScalesGradients) {
  std::mt19937_64 rng(7);
  const Network net = random_decoder(rng);
  const Vector z = random_vector(rng, net.input_dim(), -1, 1);
  const Vector y = random_vector(rng, net.output_dim(), 0.1, 0.9);
  ad::ComputationRecord rec(net);
  rec.run(as_span(z), as_span(y), LossKind::bce);
  EXPECT_LT(rel_err(ad::grad_wrt_latent(rec, -2.5), -2.5 * ad::grad_wrt_latent(rec)), 1e-15);
  EXPECT_LT(rel_err(ad::grad_wrt_params(rec, 3.0), 3.0 * ad::grad_wrt_params(rec)), 1e-15);
}

TEST(Autodiff, FrozenLayerGetsNoParameterGradient) {
  std::mt19937_64 rng(9);
  Network net = make_decoder({3, 4, 5});
  init_params(net, 1);
  net.set_frozen(0, true);
  const Vector z = random_vector(rng, 3, -1, 1);
  const Vector y = random_vector(rng, 5, 0.1, 0.9);
  ad::ComputationRecord rec(net);
  rec.run(as_span(z), as_span(y), LossKind::bce);
  const Vector g = ad::grad_wrt_params(rec);
  const auto first = static_cast<Eigen::Index>(net.weight_offset(1));
  EXPECT_TRUE(g.head(first).isZero(0.0));
  EXPECT_LT(rel_err(g.tail(g.size() - first), fd_params(net, z, y, LossKind::bce).tail(g.size() - first)),
            1e-5);
  // The latent gradient still flows through the frozen layer.
  EXPECT_LT(rel_err(ad::grad_wrt_latent(rec), fd_latent(net, z, y, LossKind::bce)), 1e-5);
}

TEST(Autodiff, GradientWithoutLossIsUsageError) {
  Network net = make_decoder({2, 3});
  ad::ComputationRecord rec(net);
  EXPECT_THROW(ad::grad_wrt_latent(rec), UsageError);
  rec.run(std::vector<double>{0.1, 0.2});
  EXPECT_THROW(ad::grad_wrt_latent(rec), UsageError);
  EXPECT_THROW(ad::grad_wrt_params(rec), UsageError);
  EXPECT_THROW(ad::hessian_vector_latent(rec, Vector::Ones(2)), UsageError);
}

TEST(Autodiff, ShapeMismatchIsUsageError) {
  Network net = make_decoder({2, 3});
  ad::ComputationRecord rec(net);
  EXPECT_THROW(rec.run(std::vector<double>{0.1}), UsageError);
  EXPECT_THROW(rec.run(std::vector<double>{0.1, 0.2}, std::vector<double>{0.5}, LossKind::bce),
               UsageError);
}

TEST(Autodiff, PassCounterCountsSweeps) {
  Network net = make_decoder({2, 3, 4});
  init_params(net, 2);
  ad::PassCounter c;
  ad::ComputationRecord rec(net, &c);
  rec.run(std::vector<double>{0.3, -0.1}, std::vector<double>{0.2, 0.4, 0.6, 0.8}, LossKind::bce);
  EXPECT_EQ(c.forward, 1u);
  ad::grad_wrt_latent(rec);
  EXPECT_EQ(c.reverse, 1u);
  EXPECT_EQ(c.param_accumulate, 0u);
  ad::grad_wrt_params(rec);
  EXPECT_EQ(c.reverse, 2u);
  EXPECT_EQ(c.param_accumulate, 1u);
  ad::second_order(rec, Vector::Ones(2), true, true);
  EXPECT_EQ(c.tangent_forward, 1u);
  EXPECT_EQ(c.tangent_reverse, 1u);
  // run, two reverse sweeps with one accumulation, then tangent forward,
  // reverse, tangent reverse and two accumulations for the mixed product.
  EXPECT_EQ(c.weight_passes(), 1u + 3u + 5u);
}

TEST(Autodiff, ActivationDerivativesMatchDifferences) {
  const double h = 1e-6;
  for (auto a : {Activation::identity, Activation::elu, Activation::sigmoid})
    for (double x : {-3.0, -0.7, -0.01, 0.02, 0.9, 4.0}) {
      const double d1 = (ad::activate(a, x + h) - ad::activate(a, x - h)) / (2 * h);
      const double d2 = (ad::activate_d1(a, x + h) - ad::activate_d1(a, x - h)) / (2 * h);
      EXPECT_NEAR(ad::activate_d1(a, x), d1, 1e-8);
      EXPECT_NEAR(ad::activate_d2(a, x), d2, 1e-8);
    }
  EXPECT_EQ(ad::activate(Activation::sigmoid, -800.0), 0.0);
  EXPECT_EQ(ad::activate(Activation::sigmoid, 800.0), 1.0);
}

}  // namespace
}  // namespace gfe
