#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hmlab/scalar.hpp"
#include "oracles.hpp"

using namespace hmlab;

namespace {

cplx rand_c(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  return {nd(rng), nd(rng)};
}

cplx rand_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(0, 2 * oracle::pi);
  return std::polar(1.0, ud(rng));
}

}  // namespace

TEST(ScalarLemma, UnitMuZeroB) {
  auto s = scalar_lemma_check(1.0, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(s.a, 2.0);
  EXPECT_NEAR(s.slack_e, 0.0, 1e-15);
  EXPECT_NEAR(s.slack_d, 5.0, 1e-15);
}

TEST(ScalarLemma, MuEqualsB) {
  const cplx mu(0.3, -1.2), w = std::polar(1.0, 0.7);
  auto s = scalar_lemma_check(mu, mu, w);
  EXPECT_NEAR(s.a, std::abs(mu), 1e-15);
  EXPECT_NEAR(s.slack_d, 0.0, 1e-14);
  EXPECT_NEAR(s.slack_e, 4 * std::pow((w * mu).real(), 2), 1e-14);
}

TEST(ScalarLemma, RejectsDegenerateInput) {
  EXPECT_THROW(scalar_lemma_check(0.0, 0.0, 1.0), Error);
  EXPECT_THROW(scalar_lemma_check(1.0, 0.0, 2.0), Error);
}

TEST(ScalarLemma, RandomTriplesHaveNonnegativeSlack) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> scale(-3, 3);
  for (int i = 0; i < 100000; ++i) {
    const cplx mu = rand_c(rng) * std::pow(10.0, scale(rng)), b = rand_c(rng) * std::pow(10.0, scale(rng));
    auto s = scalar_lemma_check(mu, b, rand_unit(rng));
    const double sc = std::max(1.0, s.a * s.a + std::norm(b));
    ASSERT_GE(s.slack_e, -1e-12 * sc) << mu << b;
    ASSERT_GE(s.slack_d, -1e-12 * sc) << mu << b;
  }
}

TEST(ScalarBound, AlphaFormula) {
  EXPECT_NEAR(alpha_for_bound(1.0), 1.0 / (4 * std::sqrt(3.0)), 1e-16);
  EXPECT_NEAR(alpha_for_bound(2.0), 1.0 / (7 * std::sqrt(3.0)), 1e-16);
  EXPECT_THROW(alpha_for_bound(0.0), Error);
  // the sign-perturbed constant is the bound constant at C + 4C/alpha
  EXPECT_NEAR(delta_for_regular(0.5, 2.0), alpha_for_bound(18.0), 1e-16);
}

TEST(ScalarBound, ZeroGIsEquality) {
  std::vector<cplx> g(16, 0.0);
  auto r = prop_scalar_check(cplx(0.6, 0.8), g, 2.0, alpha_for_bound(2.0));
  EXPECT_NEAR(r.slack, 0.0, 1e-15);
}

// z = 1, g = (A/2) e^{i theta} on the circle:
// rhs = int |1 + (A/2)e^{it}|, lhs = (1 + alpha^2 A^2/8)^{1/2}.
TEST(ScalarBound, HalfBoundMonomialByQuadrature) {
  for (double A : {1.0, 2.0, 4.0}) {
    const int m = 4096;
    TorusGrid grid(m);
    std::vector<cplx> g(m);
    for (int j = 0; j < m; ++j) g[j] = 0.5 * A * std::polar(1.0, grid.angle(j));
    const double alpha = alpha_for_bound(A);
    auto r = prop_scalar_check(1.0, g, A, alpha);
    double rhs = 0;
    const int q = 200000;
    for (int i = 0; i < q; ++i) rhs += std::abs(1.0 + 0.5 * A * std::polar(1.0, 2 * oracle::pi * (i + 0.5) / q));
    rhs /= q;
    EXPECT_NEAR(r.rhs, rhs, 1e-7);  // A = 2 has a kink at pi, grid error is O(m^-2)
    EXPECT_NEAR(r.lhs, std::sqrt(1 + alpha * alpha * A * A / 8), 1e-12);
    EXPECT_GE(r.slack, 0.0);
  }
}

TEST(ScalarBound, SampledInstances) {
  std::mt19937_64 rng(4);
  for (double A : {1.0, 2.0, 4.0}) {
    const double alpha = alpha_for_bound(A);
    for (int i = 0; i < 1000; ++i) {
      const auto shape = static_cast<SampleShape>(i % 4);
      const cplx z = rand_c(rng);
      auto g = sample_mean_zero(rng, 2 + i % 63, A * std::abs(z), shape);
      auto r = prop_scalar_check(z, g, A, alpha);
      ASSERT_FALSE(r.violated) << to_string(shape) << " A=" << A << " slack " << r.slack;
    }
  }
}

// g = +-iA|z| w-rotated: int |z + g| = |z| (1 + A^2)^{1/2}, so alpha > 1 must fail.
TEST(ScalarBound, DetectsTooLargeAlpha) {
  const cplx z(0.0, 2.0);
  const cplx w = std::conj(z) / std::abs(z);
  std::vector<cplx> g{cplx(0, 1) * 2.0 * std::abs(z) / w, cplx(0, -1) * 2.0 * std::abs(z) / w};
  EXPECT_TRUE(prop_scalar_check(z, g, 2.0, 1.5).violated);
  EXPECT_FALSE(prop_scalar_check(z, g, 2.0, 1.0).violated);
}

TEST(ScalarBound, RejectsBrokenPreconditions) {
  std::vector<cplx> g{1.0, 1.0};
  EXPECT_THROW(prop_scalar_check(1.0, g, 2.0, 0.1), Error);  // mean not zero
  std::vector<cplx> h{3.0, -3.0};
  EXPECT_THROW(prop_scalar_check(1.0, h, 2.0, 0.1), Error);  // exceeds A|z|
}

TEST(PerturbedBound, LargeBRegime) {
  std::mt19937_64 rng(8);
  const int m = 64;
  TorusGrid grid(m);
  std::vector<cplx> sigma(m);
  for (int j = 0; j < m; ++j) sigma[j] = grid.sign_cos(j);
  const double C = 2.0, alpha_reg = 0.5;
  const double delta = delta_for_regular(alpha_reg, C);
  for (int i = 0; i < 500; ++i) {
    const cplx z = rand_c(rng);
    auto g = sample_mean_zero(rng, m, C * std::abs(z), static_cast<SampleShape>(i % 4));
    const double Ap = 4 * C / alpha_reg;
    const cplx b = rand_unit(rng) * Ap * std::abs(z) * (1.0 + 3.0 * std::uniform_real_distribution<double>()(rng));
    auto r = perturbed_scalar_check(z, b, g, sigma, C, alpha_reg, delta);
    ASSERT_FALSE(r.violated) << r.slack;
  }
}

TEST(PerturbedBound, SmallBRegime) {
  std::mt19937_64 rng(9);
  const int m = 32;
  TorusGrid grid(m);
  std::vector<cplx> sigma(m);
  for (int j = 0; j < m; ++j) sigma[j] = grid.sign_cos(j);
  const double C = 1.0, alpha_reg = 0.9;
  const double delta = delta_for_regular(alpha_reg, C);
  for (int i = 0; i < 500; ++i) {
    const cplx z = rand_c(rng);
    auto g = sample_mean_zero(rng, m, C * std::abs(z), static_cast<SampleShape>(i % 4));
    const cplx b = rand_c(rng) * std::abs(z);
    ASSERT_FALSE(perturbed_scalar_check(z, b, g, sigma, C, alpha_reg, delta).violated);
  }
}

TEST(CosineIdentity, ZeroFunction) {
  TorusGrid g(32);
  auto r = cosine_identity_check(TorusFunction::constant(g, 0.0), 1.0, 0.0);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
}

// h = e^{i theta}, w = 1, b = 0: both sides are 1/2 since <cos, sigma> = c1
// makes c1^2 + 1/2 - 2 c1 <cos,sigma> + c1^2 collapse.
TEST(CosineIdentity, FirstHarmonic) {
  const int m = 4096;
  TorusGrid g(m);
  auto r = cosine_identity_check(TorusFunction::monomial(g, 1), 1.0, 0.0);
  EXPECT_NEAR(r.lhs, 0.5, 1e-10);
  EXPECT_NEAR(r.rhs, 0.5, 1e-10);
  // <u, sigma> against the continuum value 2/pi
  double c1 = 0;
  for (int j = 0; j < m; ++j) c1 += std::cos(oracle::node(m, j)) * (std::cos(oracle::node(m, j)) > 0 ? 1 : -1);
  EXPECT_NEAR(c1 / m, 2 / oracle::pi, 1e-6);
}

TEST(CosineIdentity, RandomInputs) {
  std::mt19937_64 rng(12);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    auto p = oracle::random_poly(rng, 1 + i % 32, false, true, true);
    TorusFunction h(TorusGrid(256), oracle::sample(256, p));
    auto r = cosine_identity_check(h, rand_unit(rng), rand_c(rng));
    worst = std::max(worst, r.residual);
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(CosineIdentity, RejectsNonAnalytic) {
  TorusGrid g(32);
  EXPECT_THROW(cosine_identity_check(TorusFunction::monomial(g, -2), 1.0, 0.0), Error);
}

TEST(EvenPartEstimates, RandomSlices) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 300; ++i) {
    auto p = oracle::random_poly(rng, 1 + i % 8, false, true, true);
    TorusFunction h(TorusGrid(64), oracle::sample(64, p));
    const cplx b = i % 5 == 0 ? cplx(0.0) : rand_c(rng);
    auto e = even_part_estimates(h, rand_unit(rng), b);
    ASSERT_GE(e.slack_b, -1e-9 * e.scale);
    ASSERT_GE(e.slack_w, -1e-9 * e.scale);
  }
}
