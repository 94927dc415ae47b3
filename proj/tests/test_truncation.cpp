#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hmlab/truncation.hpp"
#include "oracles.hpp"

using namespace hmlab;

namespace {

TorusFunction from_oracle(int m, const oracle::TrigPoly& p) { return TorusFunction(TorusGrid(m), oracle::sample(m, p)); }

TruncationConfig quick(int paths = 4000, double dt = 1e-3) {
  TruncationConfig c;
  c.n_paths = paths;
  c.dt = dt;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(MaxModulus, Examples) {
  TorusGrid g(64);
  std::vector<double> levels{0.5, 0.9};
  EXPECT_NEAR(max_modulus_in_disk(TorusFunction::monomial(g, 1), levels), 1.0, 1e-12);
  EXPECT_EQ(max_modulus_in_disk(TorusFunction::constant(g, 0.0), levels), 0.0);
  EXPECT_NEAR(max_modulus_in_disk(TorusFunction::monomial(g, 1) + TorusFunction::monomial(g, 2), levels), 2.0, 1e-3);
}

TEST(MaxModulus, DominatesBoundarySamples) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = oracle::random_poly(rng, 6, false, true, true);
    auto h = from_oracle(64, p);
    double boundary = 0;
    for (int j = 0; j < 2000; ++j) boundary = std::max(boundary, std::abs(p(2 * oracle::pi * j / 2000.0)));
    EXPECT_GE(max_modulus_in_disk(h, {0.5}), boundary - 1e-2 * boundary);
  }
}

TEST(Truncate, ZeroFunction) {
  TorusGrid g(32);
  auto r = truncate(TorusFunction::constant(g, 0.0), 0.3, quick());
  EXPECT_TRUE(r.fast_path);
  EXPECT_EQ(r.g_hat.sup_norm(), 0.0);
  EXPECT_EQ(r.hit_fraction, 0.0);
}

TEST(Truncate, FastPathReturnsInputExactly) {
  TorusGrid g(32);
  auto h = 0.2 * TorusFunction::monomial(g, 1) + cplx(0, 0.1) * TorusFunction::monomial(g, 3);
  auto cfg = quick();
  cfg.C0 = 4;
  auto r = truncate(h, 0.1, cfg);
  EXPECT_TRUE(r.fast_path);
  EXPECT_EQ(r.hit_fraction, 0.0);
  for (int j = 0; j < g.size(); ++j) EXPECT_EQ(r.g_hat[j], h[j]);
}

TEST(Truncate, DegenerateZeroBasePoint) {
  TorusGrid g(32);
  auto r = truncate(TorusFunction::monomial(g, 1), 0.0, quick());
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.hit_fraction, 1.0);
  EXPECT_EQ(r.g_hat.sup_norm(), 0.0);
}

TEST(Truncate, RejectsNonAnalytic) {
  TorusGrid g(32);
  EXPECT_THROW(truncate(TorusFunction::monomial(g, -1), 1.0, quick()), Error);
}

TEST(Truncate, RejectsBadConfig) {
  TorusGrid g(32);
  auto cfg = quick();
  cfg.n_paths = 50;
  EXPECT_THROW(truncate(TorusFunction::monomial(g, 1), 1.0, cfg), Error);
  cfg = quick();
  cfg.C0 = 0.5;
  EXPECT_THROW(truncate(TorusFunction::monomial(g, 1), 1.0, cfg), Error);
}

// h = c e^{i theta} stops on the circle |w| = r with r = C0|z|/|c|, at a
// uniform angle; the exit angle then has Poisson law, so
// E(h(B_rho) | exit theta) = c r^2 e^{i theta}.
TEST(Truncate, MonomialMatchesPoissonKernelFormula) {
  const int m = 64;
  TorusGrid g(m);
  const cplx c(2.0, 0.0);
  const double z = 0.1;
  auto cfg = quick(60000, 1e-5);
  cfg.C0 = 1.0;
  auto r = truncate(c * TorusFunction::monomial(g, 1), z, cfg);
  ASSERT_FALSE(r.fast_path);
  const double rad = cfg.C0 * z / std::abs(c);
  const cplx expect = c * rad * rad;
  EXPECT_GT(r.hit_fraction, 0.999);
  // coefficient SE: recorded values have modulus ~ C0|z|
  const double se = cfg.C0 * z / std::sqrt(cfg.n_paths);
  // overshoot of the discrete level crossing inflates r by ~0.6 sqrt(2 dt)
  const double bias = std::abs(c) * (std::pow(rad + 0.6 * std::sqrt(2 * cfg.dt), 2) - rad * rad);
  EXPECT_LE(std::abs(r.g_hat.coeff(1) - expect), 3 * se + bias);
  for (int n = 2; n <= m / 4; ++n) EXPECT_LE(std::abs(r.g_hat.coeff(n)), 4 * se) << n;
}

TEST(Truncate, LargeFunctionIsCappedByLevel) {
  TorusGrid g(32);
  const double z = 0.05;
  auto cfg = quick(6000, 1e-4);
  cfg.C0 = 4;
  auto h = (10 * cfg.C0 * z) * TorusFunction::monomial(g, 1);
  auto r = truncate(h, z, cfg);
  EXPECT_GT(r.hit_fraction, 0.0);
  double se_max = 0;
  for (double s : r.g_se) se_max = std::max(se_max, s);
  EXPECT_LE(r.g_hat.sup_norm(), cfg.C0 * z + 3 * se_max);
  EXPECT_TRUE(is_analytic(r.g_hat));
  EXPECT_LE(std::abs(r.g_hat.coeff(0)), 1e-9);
}

TEST(Truncate, ExitAnglesUniformForZeroFunction) {
  TorusGrid g(32);
  auto cfg = quick(8000);
  cfg.force_simulation = true;
  auto r = truncate(TorusFunction::constant(g, 0.0), 0.0, cfg);
  const double p = 1.0 / g.size();
  const double mu = p * cfg.n_paths, sd = std::sqrt(cfg.n_paths * p * (1 - p));
  long total = 0;
  for (long c : r.bin_counts) {
    EXPECT_LE(std::abs(c - mu), 4 * sd);
    total += c;
  }
  EXPECT_EQ(total, cfg.n_paths);
  EXPECT_EQ(r.hit_fraction, 0.0);
}

TEST(Truncate, OptionalStoppingKeepsMeanZero) {
  TorusGrid g(32);
  std::mt19937_64 rng(11);
  auto h = from_oracle(32, oracle::random_poly(rng, 4, false, true, true));
  auto cfg = quick(6000, 1e-4);
  cfg.C0 = 2;
  const double z = 0.3 * h.sup_norm() / cfg.C0;
  auto r = truncate(h, z, cfg);
  ASSERT_FALSE(r.fast_path);
  cplx s = 0;
  double var = 0;
  for (int b = 0; b < g.size(); ++b) {
    const double w = static_cast<double>(r.bin_counts[b]) / cfg.n_paths;
    s += w * r.g_binned[b];
    var += w * w * r.bin_se[b] * r.bin_se[b];
  }
  EXPECT_LE(std::abs(s), 2 * std::sqrt(var));
}

TEST(Truncate, ForcedSimulationAgreesWithFastPath) {
  TorusGrid g(32);
  auto h = 0.2 * TorusFunction::monomial(g, 1) + cplx(0.05, 0.05) * TorusFunction::monomial(g, 2);
  auto cfg = quick(20000, 1e-4);
  cfg.force_simulation = true;
  cfg.C0 = 4;
  auto r = truncate(h, 0.1, cfg);
  EXPECT_FALSE(r.fast_path);
  EXPECT_EQ(r.hit_fraction, 0.0);
  // exact bin mean of h(B_tau): midpoint-rule average of h across each bin
  const int bins = g.size();
  for (int b = 0; b < bins; ++b) {
    cplx avg = 0;
    const int q = 400;
    for (int i = 0; i < q; ++i) {
      const double t = 2 * oracle::pi * (b + (i + 0.5) / q) / bins;
      avg += (0.2 * std::polar(1.0, t) + cplx(0.05, 0.05) * std::polar(1.0, 2 * t)) / double(q);
    }
    EXPECT_LE(std::abs(r.g_binned[b] - avg), 3 * r.bin_se[b]) << b;
    EXPECT_NEAR(std::abs(bin_average(h, bins)[b] - avg), 0.0, 1e-6);
  }
}

TEST(Truncate, HitFractionMonotoneInLevel) {
  TorusGrid g(32);
  std::mt19937_64 rng(5);
  auto h = from_oracle(32, oracle::random_poly(rng, 3, false, true, true));
  const double z = 0.05 * h.sup_norm();
  double prev = 2;
  for (double C0 : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    auto cfg = quick(2000);
    cfg.C0 = C0;
    cfg.force_simulation = true;
    auto r = truncate(h, z, cfg);
    EXPECT_LE(r.hit_fraction, prev) << C0;
    EXPECT_GE(r.hit_fraction, 0.0);
    EXPECT_LE(r.hit_fraction, 1.0);
    prev = r.hit_fraction;
  }
}

TEST(Truncate, ThreadCountDoesNotChangeResult) {
  TorusGrid g(32);
  std::mt19937_64 rng(9);
  auto h = from_oracle(32, oracle::random_poly(rng, 4, false, true, true));
  auto cfg = quick(1500);
  cfg.C0 = 2;
  const double z = 0.2 * h.sup_norm() / cfg.C0;
  cfg.threads = 1;
  auto a = truncate(h, z, cfg);
  cfg.threads = 4;
  auto b = truncate(h, z, cfg);
  for (int j = 0; j < g.size(); ++j) EXPECT_EQ(a.g_hat[j], b.g_hat[j]);
  EXPECT_EQ(a.bin_counts, b.bin_counts);
  EXPECT_EQ(a.hit_fraction, b.hit_fraction);
}

TEST(Truncate, JsonEcho) {
  TorusGrid g(16);
  auto cfg = quick(200);
  cfg.C0 = 2;
  auto r = truncate(TorusFunction::monomial(g, 1), 0.1, cfg);
  auto j = to_json(r, cfg);
  EXPECT_EQ(j["bins"].size(), 16u);
  EXPECT_EQ(j["config"]["n_paths"], 200);
  EXPECT_TRUE(j.contains("wall_seconds"));
}

TEST(VerifyTruncation, ZeroFunctionAnyB) {
  TorusGrid g(64);
  auto zero = TorusFunction::constant(g, 0.0);
  for (cplx b : {cplx(0), cplx(1), cplx(-2, 1), cplx(0, 5)}) {
    auto s = verify_truncation(zero, cplx(0.3, -0.2), b, zero);
    EXPECT_FALSE(s.violated);
    EXPECT_GE(s.slack, -1e-12);
  }
}

TEST(VerifyTruncation, FastPathWithZeroB) {
  TorusGrid g(64);
  auto h = 0.1 * TorusFunction::monomial(g, 2);
  auto s = verify_truncation(h, 1.0, 0.0, h);
  EXPECT_NEAR(s.lhs, 1.0, 1e-15);
  EXPECT_GE(s.slack, -1e-12);
}

TEST(VerifyTruncation, SlackMatchesDirectSums) {
  TorusGrid g(16);
  std::mt19937_64 rng(2);
  auto h = from_oracle(16, oracle::random_poly(rng, 3, false, true, true));
  auto gg = 0.5 * h;
  const cplx z(0.2, 0.1), b(0.4, -0.3);
  double lhs = std::abs(z), rhs = 0;
  for (int j = 0; j < 16; ++j) {
    const double sig = std::cos(oracle::node(16, j)) > 0 ? 1.0 : -1.0;
    lhs += 0.25 * std::abs(h[j] - gg[j]) / 16;
    rhs += std::abs(z + h[j] - b * sig) / 16;
  }
  auto s = verify_truncation(h, z, b, gg, 0.01);
  EXPECT_NEAR(s.lhs, lhs, 1e-14);
  EXPECT_NEAR(s.rhs, rhs, 1e-14);
  EXPECT_NEAR(s.se, 0.0025, 1e-15);
}

TEST(VerifyTruncation, SweepOverB) {
  TorusGrid g(32);
  std::mt19937_64 rng(21);
  auto h = from_oracle(32, oracle::random_poly(rng, 5, false, true, true));
  auto cfg = quick(5000, 1e-4);
  cfg.C0 = 34;
  const double z = 0.5 * h.sup_norm() / cfg.C0;
  auto r = truncate(h, z, cfg);
  ASSERT_FALSE(r.fast_path);
  for (int a = -2; a <= 2; ++a)
    for (int c = -2; c <= 2; ++c) {
      auto s = verify_truncation(h, z, cplx(a, c) * 0.5 * h.sup_norm(), r);
      EXPECT_FALSE(s.violated) << a << "," << c << " slack " << s.slack << " se " << s.se;
    }
}
