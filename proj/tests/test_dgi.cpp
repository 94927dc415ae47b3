#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <optional>
#include <random>

#include "hmlab/dgi.hpp"
#include "oracles.hpp"

using namespace hmlab;

namespace {

Martingale single_step(const TorusGrid& g, cplx start, const std::function<cplx(double)>& f) {
  std::vector<ProductFunction> d{ProductFunction::sample(g, 1, [&](std::span<const double> th) { return f(th[0]); })};
  return Martingale(g, start, std::move(d));
}

// dF_k = e^{2 i theta_k} for k = 1..n
Martingale second_harmonic_ladder(int m, int n) {
  TorusGrid g(m);
  std::vector<ProductFunction> d;
  for (int k = 1; k <= n; ++k)
    d.push_back(ProductFunction::sample(g, k, [k](std::span<const double> th) { return std::polar(1.0, 2 * th[k - 1]); }));
  return Martingale(g, 0.0, std::move(d));
}

Martingale spiky_hardy(std::uint64_t seed) {
  HardyConfig hc;
  hc.m = 16;
  hc.depth = 2;
  hc.degree = 2;
  hc.spike = 3.0;
  hc.seed = seed;
  return random_hardy(hc);
}

double total_expectation(const ProductFunction& f) { return expectation(f).real(); }

}  // namespace

TEST(StepInequality, ZeroBIsConditionalJensen) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    HardyConfig hc;
    hc.m = 16;
    hc.depth = 3;
    hc.seed = seed;
    const Martingale F = random_hardy(hc);
    const Martingale D = random_dyadic(16, 3, seed + 100);
    const Martingale B = Martingale::zero(F.grid(), 3);
    for (int k = 1; k <= 3; ++k)
      for (cplx s : verify_step_inequality(F, D, B, k).values()) ASSERT_GE(s.real(), -1e-10);
  }
}

TEST(StepInequality, RejectsBadShapes) {
  const Martingale F = Martingale::zero(TorusGrid(16), 2);
  const Martingale D = Martingale::zero(TorusGrid(16), 1);
  EXPECT_THROW(verify_step_inequality(F, D, F, 1), Error);
  EXPECT_THROW(verify_step_inequality(F, F, F, 3), Error);
}

TEST(Decompose, ZeroMartingale) {
  const Martingale F = Martingale::zero(TorusGrid(16), 2);
  TruncationConfig cfg;
  cfg.n_paths = 1000;
  auto rep = decompose(F, F, cfg);
  EXPECT_EQ(rep.G.last().sup_norm(), 0.0);
  EXPECT_EQ(rep.B.last().sup_norm(), 0.0);
  EXPECT_EQ(rep.simulated_slices(), 0u);
  EXPECT_EQ(rep.step_pass_fraction(), 1.0);
}

TEST(Decompose, FastPathKeepsF) {
  TorusGrid g(32);
  const Martingale F = single_step(g, 10.0, [](double t) { return 0.5 * std::polar(1.0, t) + 0.2 * std::polar(1.0, 3 * t); });
  const Martingale D = Martingale::zero(g, 1);
  TruncationConfig cfg;
  cfg.n_paths = 1000;
  auto rep = decompose(F, D, cfg);
  EXPECT_EQ(rep.G.start(), F.start());
  for (std::size_t i = 0; i < F.diff(1).size(); ++i) EXPECT_EQ(rep.G.diff(1)[i], F.diff(1)[i]);
  EXPECT_EQ(norm_A(rep.B), 0.0);
  auto c = verify_dgi(rep, 0);
  ASSERT_NE(c.find("B_A_over_FD_L1"), nullptr);
  EXPECT_EQ(c.find("B_A_over_FD_L1")->value, 0.0);
  EXPECT_TRUE(c.all_pass());
}

TEST(Decompose, Errors) {
  TorusGrid g(16);
  HardyConfig hc;
  hc.m = 16;
  hc.depth = 2;
  const Martingale F = random_hardy(hc);
  const Martingale nonhardy = random_martingale(hc);
  const Martingale D = random_dyadic(16, 2, 3);
  TruncationConfig cfg;
  cfg.n_paths = 1000;
  auto code = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return std::optional<Errc>(e.code());
    }
    return std::optional<Errc>{};
  };
  EXPECT_EQ(code([&] { decompose(nonhardy, D, cfg); }), Errc::NotHardy);
  EXPECT_EQ(code([&] { decompose(F, F, cfg); }), Errc::NotDyadic);
  EXPECT_EQ(code([&] { decompose(F, random_dyadic(16, 1, 3), cfg); }), Errc::DepthMismatch);
}

// Summing the step slacks telescopes:
// sum_k E slack_k = E|F_n - D_n| - |F_0 - D_0| - 1/4 ||B||_A.
TEST(Decompose, SlacksTelescope) {
  const Martingale F = spiky_hardy(7);
  const Martingale D = dyadic_project(F);
  TruncationConfig cfg;
  cfg.n_paths = 1000;
  cfg.dt = 1e-3;
  cfg.C0 = 2;
  auto rep = decompose(F, D, cfg);
  double sum = 0;
  for (const auto& s : rep.step_slack) sum += total_expectation(s);
  const double direct = norm_L1(F - D) - std::abs(F.start() - D.start()) - 0.25 * norm_A(rep.B);
  EXPECT_NEAR(sum, direct, 1e-12 * std::max(1.0, norm_L1(F)));
  EXPECT_GT(rep.simulated_slices(), 0u);
}

TEST(Decompose, SpikyDepthTwoStepInequality) {
  const Martingale F = spiky_hardy(11);
  const Martingale D = dyadic_project(F);
  TruncationConfig cfg;
  cfg.n_paths = 5000;
  cfg.seed = 5;
  auto rep = decompose(F, D, cfg);
  EXPECT_EQ(rep.slice_total(), 17u);
  EXPECT_GE(rep.step_pass_fraction(), 0.95);
  auto c = verify_dgi(rep, 5);
  EXPECT_TRUE(c.all_pass()) << to_json(c).dump(2);
}

TEST(Decompose, SmallLevelStillSatisfiesBound) {
  const Martingale F = spiky_hardy(13);
  const Martingale D = dyadic_project(F);
  TruncationConfig cfg;
  cfg.n_paths = 5000;
  cfg.C0 = 2;
  cfg.seed = 9;
  auto rep = decompose(F, D, cfg);
  EXPECT_GT(rep.simulated_slices(), 0u);
  auto c = verify_dgi(rep, 9);
  EXPECT_TRUE(c.all_pass()) << to_json(c).dump(2);
  const double r = c.find("B_A_over_FD_L1")->value;
  EXPECT_GT(r, 0.0);
  EXPECT_TRUE(std::isfinite(c.find("TW_GminusD_P_ratio")->value));
}

TEST(Decompose, DeterministicForSeed) {
  const Martingale F = spiky_hardy(3);
  const Martingale D = dyadic_project(F);
  TruncationConfig cfg;
  cfg.n_paths = 500;
  cfg.dt = 1e-3;
  cfg.C0 = 2;
  auto a = decompose(F, D, cfg);
  cfg.threads = 3;
  auto b = decompose(F, D, cfg);
  for (std::size_t i = 0; i < a.G.last().size(); ++i) ASSERT_EQ(a.G.last()[i], b.G.last()[i]);
}

TEST(Iteration, DeterministicNondecreasing) {
  TorusGrid g(4);
  IterationInstance inst;
  const double c[] = {1.0, 1.5, 4.0};
  for (double x : c) inst.M.push_back(ProductFunction::scalar(g, x));
  for (int k = 1; k <= 2; ++k) {
    inst.V.push_back(ProductFunction::scalar(g, 0.0));
    inst.w.push_back(ProductFunction::scalar(g, 0.0));
  }
  auto r = iteration_check(inst);
  ASSERT_TRUE(r.hypothesis_holds);
  EXPECT_DOUBLE_EQ(r.hypothesis_slack[0], 0.5);
  EXPECT_DOUBLE_EQ(r.hypothesis_slack[1], 2.5);
  EXPECT_DOUBLE_EQ(r.lhs, 0.0);
  EXPECT_DOUBLE_EQ(r.rhs, 8.0);  // 2 (E M_2)^{1/2} (E max M)^{1/2} = 2 * 4
  EXPECT_DOUBLE_EQ(r.conclusion_slack, 8.0);
}

TEST(Iteration, RandomInstancesSatisfyConclusion) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto inst = random_iteration_instance(4, 1 + s % 3, s, 0.0);
    auto r = iteration_check(inst, 1e-12);
    ASSERT_TRUE(r.hypothesis_holds) << s;
    ASSERT_GE(r.conclusion_slack, -1e-9) << s;
  }
}

TEST(Iteration, ViolatedHypothesisSkipsConclusion) {
  auto inst = random_iteration_instance(4, 2, 42, -0.5);
  auto r = iteration_check(inst);
  EXPECT_FALSE(r.hypothesis_holds);
  EXPECT_TRUE(std::isnan(r.conclusion_slack));
}

TEST(Iteration, RejectsNegativeEntries) {
  auto inst = random_iteration_instance(4, 1, 1);
  inst.V[0] = cplx(-1.0) * inst.V[0];
  EXPECT_THROW(iteration_check(inst), Error);
}

TEST(Iteration, InstanceFromDecomposition) {
  const Martingale F = spiky_hardy(17);
  const Martingale D = dyadic_project(F);
  TruncationConfig cfg;
  cfg.n_paths = 2000;
  cfg.dt = 1e-3;
  cfg.C0 = 1;
  auto rep = decompose(F, D, cfg);
  auto r = iteration_check(iteration_instance_from(rep, 0.01), 1e-12);
  EXPECT_GT(rep.simulated_slices(), 0u);
  ASSERT_TRUE(r.hypothesis_holds);
  EXPECT_GE(r.conclusion_slack, -1e-9);
  // the M ladder is |F_k - D_k| and must match the L1 norms
  auto inst = iteration_instance_from(rep, 0.01);
  EXPECT_NEAR(total_expectation(inst.M.back()), norm_L1(F - D), 1e-12);
}

// <e^{2 i theta}, sigma> = 0 by direct quadrature
TEST(Interpolatory, SecondHarmonicIsOrthogonalToSigma) {
  for (int m : {16, 64, 256}) {
    oracle::cplx s = 0;
    for (int j = 0; j < m; ++j) {
      const double t = oracle::node(m, j);
      s += std::polar(1.0, 2 * t) * (std::cos(t) > 0 ? 1.0 : -1.0);
    }
    EXPECT_NEAR(std::abs(s) / m, 0.0, 1e-14);
  }
}

TEST(Interpolatory, EvenHarmonicLadderHasNoDyadicPart) {
  const Martingale F = second_harmonic_ladder(16, 2);
  TruncationConfig cfg;
  cfg.n_paths = 1000;
  auto res = interpolatory_pipeline(F, cfg, 1);
  EXPECT_TRUE(res.dyadic_part_zero);
  EXPECT_EQ(res.dyadic_l1, 0.0);
  EXPECT_EQ(res.ratio_alpha8, 0.0);
  EXPECT_DOUBLE_EQ(res.A0, 1.0);
  EXPECT_TRUE(res.report.all_pass());
}

TEST(Interpolatory, RandomHardyReportsFiniteConstants) {
  HardyConfig hc;
  hc.m = 16;
  hc.depth = 2;
  hc.seed = 21;
  const Martingale F = random_hardy(hc);
  TruncationConfig cfg;
  cfg.n_paths = 1000;
  cfg.dt = 1e-3;
  auto res = interpolatory_pipeline(F, cfg, 21);
  EXPECT_FALSE(res.dyadic_part_zero);
  EXPECT_GT(res.ratio_alpha8, 0.0);
  EXPECT_TRUE(std::isfinite(res.ratio_alpha8));
  EXPECT_GE(res.A0, 1.0 - 1e-12 - res.dyadic_l1 / res.residual_l1);
  for (const auto& row : res.report.rows) EXPECT_TRUE(std::isfinite(row.value)) << row.check;
}

TEST(Interpolatory, ExponentFitRecoversSlope) {
  std::vector<InterpolatoryResult> batch;
  for (double s : {1e-3, 1e-2, 1e-1, 0.5}) {
    InterpolatoryResult r;
    r.f_l1 = 2.0;
    r.residual_l1 = 2.0 * s;
    r.dyadic_l1 = 2.0 * 0.7 * std::pow(s, 0.3);
    batch.push_back(r);
  }
  EXPECT_NEAR(fit_interpolation_exponent(batch), 0.3, 1e-12);
  EXPECT_TRUE(std::isnan(fit_interpolation_exponent({})));
}

TEST(CosineEstimates, SecondHarmonicStep) {
  const Martingale G = second_harmonic_ladder(64, 1);
  const SteeringWeights W = steering_weights(G, Martingale::zero(G.grid(), 1));
  auto c = cosine_estimate_check(G, W, 0);
  EXPECT_TRUE(c.all_pass());
  // E_D G = 0, so the dyadic part ratio vanishes
  EXPECT_NEAR(c.find("dyadic_part_H1_ratio")->value, 0.0, 1e-12);
  const Martingale U = cosine_part(G);
  // U = cos(2 theta)
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(std::abs(U.diff(1)[j] - std::cos(2 * oracle::node(64, j))), 0.0, 1e-12);
}

TEST(CosineEstimates, RandomHardyWithSteering) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    HardyConfig hc;
    hc.m = 16;
    hc.depth = 2;
    hc.seed = seed;
    const Martingale G = random_hardy(hc);
    const SteeringWeights W = steering_weights(G, random_dyadic(16, 2, seed));
    auto c = cosine_estimate_check(G, W, seed);
    EXPECT_TRUE(c.all_pass()) << to_json(c).dump(2);
  }
}

TEST(Distance, ZeroCandidateGivesOne) {
  TorusGrid g(64);
  const Martingale D = single_step(g, 0.0, [](double t) { return std::cos(t) > 0 ? 1.0 : -1.0; });
  DistanceConfig cfg;
  cfg.random_starts = 0;
  cfg.restarts = 0;
  cfg.sweeps = 0;
  auto r = distance_experiment(D, cfg);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
}

// min_c int |sigma - c e^{i theta}| by a two-dimensional sweep over c.
TEST(Distance, FirstHarmonicSweep) {
  const int m = 64;
  TorusGrid g(m);
  const Martingale D = single_step(g, 0.0, [](double t) { return std::cos(t) > 0 ? 1.0 : -1.0; });
  double best = 1.0;
  for (double a = 0.0; a <= 1.5; a += 0.002)
    for (double b = -0.2; b <= 0.2; b += 0.01) {
      double s = 0;
      for (int j = 0; j < m; ++j) {
        const double t = oracle::node(m, j);
        s += std::abs((std::cos(t) > 0 ? 1.0 : -1.0) - oracle::cplx(a, b) * std::polar(1.0, t));
      }
      best = std::min(best, s / m);
    }
  DistanceConfig cfg;
  cfg.degree = 1;
  cfg.sweeps = 40;
  auto r = distance_experiment(D, cfg);
  EXPECT_LT(r.ratio, 1.0);
  EXPECT_GT(r.ratio, 0.0);
  // the search space with degree 1 also carries F_0, so it can only do better
  EXPECT_LE(r.ratio, best + 2e-3);
}

TEST(Distance, DepthTwoDyadic) {
  const Martingale D = random_dyadic(16, 2, 4);
  DistanceConfig cfg;
  auto r = distance_experiment(D, cfg);
  EXPECT_GE(r.candidates, 500u);
  EXPECT_GT(r.ratio, 0.0);
  EXPECT_LE(r.ratio, 1.0);
}

TEST(Distance, RejectsNonDyadicOrZero) {
  const Martingale Z = Martingale::zero(TorusGrid(16), 1);
  EXPECT_THROW(distance_experiment(Z, DistanceConfig{}), Error);
  EXPECT_THROW(distance_experiment(second_harmonic_ladder(16, 1), DistanceConfig{}), Error);
}
