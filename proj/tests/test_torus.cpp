#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hmlab/torus.hpp"
#include "oracles.hpp"

using namespace hmlab;

namespace {

TorusFunction from_poly(int m, const oracle::TrigPoly& p) {
  return TorusFunction(TorusGrid(m), oracle::sample(m, p));
}

double max_diff(const TorusFunction& a, const std::vector<cplx>& b) {
  double d = 0;
  for (int j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
  return d;
}

}  // namespace

TEST(TorusGrid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(TorusGrid(6), Error);
  EXPECT_THROW(TorusGrid(2), Error);
  EXPECT_THROW(TorusGrid(0), Error);
  EXPECT_NO_THROW(TorusGrid(4));
}

TEST(TorusGrid, NodesAvoidZerosOfCosineAndReflect) {
  for (int m : {4, 8, 64, 1024}) {
    TorusGrid g(m);
    for (int j = 0; j < m; ++j) {
      const double c = std::cos(g.angle(j));
      EXPECT_GT(std::abs(c), 1e-6);
      EXPECT_EQ(g.sign_cos(j), c > 0 ? 1.0 : -1.0);
      // -theta_j coincides with theta_{m-1-j} mod 2 pi
      const double back = g.angle(g.reflect(j));
      EXPECT_NEAR(std::remainder(back + g.angle(j), 2 * kPi), 0.0, 1e-12);
    }
  }
}

TEST(Integrate, Examples) {
  TorusGrid g(1024);
  EXPECT_NEAR(std::abs(integrate(TorusFunction::constant(g, 1.0)) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(integrate(TorusFunction::monomial(g, 1))), 0.0, 1e-15);
  auto absc = TorusFunction::sample(g, [](double t) { return std::abs(std::cos(t)); });
  EXPECT_NEAR(integrate(absc).real(), 2.0 / kPi, 1e-6);
}

TEST(Integrate, ExactForTrigPolynomialsBelowGridDegree) {
  std::mt19937_64 rng(11);
  const int m = 64;
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_poly(rng, m - 1, false, false, false);
    auto f = from_poly(m, p);
    EXPECT_LT(std::abs(integrate(f) - p.c[p.deg]), 1e-12);
  }
}

TEST(Coefficients, MatchDirectSum) {
  std::mt19937_64 rng(3);
  for (int m : {8, 32, 256}) {
    auto p = oracle::random_poly(rng, m / 2 - 1, false, false, false);
    auto vals = oracle::sample(m, p);
    TorusFunction f(TorusGrid(m), vals);
    for (int n = -m / 2 + 1; n < m / 2; ++n) EXPECT_LT(std::abs(f.coeff(n) - oracle::coeff(vals, n)), 1e-12);
    EXPECT_LT(std::abs(f.coeff(0) - integrate(f)), 1e-14);
  }
}

TEST(Coefficients, RoundTripAndParseval) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int m : {4, 16, 128, 1024}) {
    std::vector<cplx> v(m);
    for (auto& z : v) z = {nd(rng), nd(rng)};
    TorusFunction f(TorusGrid(m), v);
    auto back = TorusFunction::from_coefficients(f.grid(), f.coefficients());
    double scale = 0, energy = 0;
    for (auto z : v) {
      scale = std::max(scale, std::abs(z));
      energy += std::norm(z);
    }
    EXPECT_LT(max_diff(back, v), 1e-12 * scale);
    double spec = 0;
    for (auto c : f.coefficients()) spec += std::norm(c);
    EXPECT_NEAR(spec, energy / m, 1e-10 * energy / m);
  }
}

TEST(Hilbert, Examples) {
  TorusGrid g(64);
  auto c = TorusFunction::sample(g, [](double t) { return std::cos(t); });
  auto s = oracle::sample(64, oracle::TrigPoly{{cplx(0, 0.5), 0, cplx(0, -0.5)}, 1});
  EXPECT_LT(max_diff(hilbert(c), s), 1e-13);
  EXPECT_LT(hilbert(TorusFunction::constant(g, 3.0)).sup_norm(), 1e-14);
  auto e3 = TorusFunction::monomial(g, 3);
  auto want = TorusFunction::monomial(g, 3, cplx(0, -1));
  EXPECT_LT(max_diff(hilbert(e3), std::vector<cplx>(want.values().begin(), want.values().end())), 1e-13);
  EXPECT_LT(std::abs(hilbert(e3).coeff(0)), 1e-15);
}

TEST(Hilbert, MatchesTermwiseOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_poly(rng, 20, trial % 2 == 0, false, false);
    auto h = hilbert(from_poly(128, p));
    EXPECT_LT(max_diff(h, oracle::sample(128, oracle::hilbert(p))), 1e-12);
  }
}

TEST(Hilbert, SquareIsMinusIdentityOnMeanZeroPart) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_poly(rng, 30, false, false, false);
    auto f = from_poly(128, p);
    auto hh = hilbert(hilbert(f));
    const cplx mean = integrate(f);
    for (int j = 0; j < 128; ++j) EXPECT_LT(std::abs(hh[j] + f[j] - mean), 1e-10 * tol_scale(f));
  }
}

TEST(Hilbert, EvenInputGivesOddOutput) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = oracle::random_poly(rng, 15, true, false, false);
    for (int n = 1; n <= p.deg; ++n) p.c[p.deg - n] = p.c[p.deg + n] = p.c[p.deg + n].real();
    auto f = from_poly(64, p);
    auto h = hilbert(f);
    for (int j = 0; j < 64; ++j) EXPECT_LT(std::abs(h[j] + h[f.grid().reflect(j)]), 1e-10);
  }
}

TEST(AnalyticComplete, Examples) {
  TorusGrid g(64);
  auto c = TorusFunction::sample(g, [](double t) { return std::cos(t); });
  auto e1 = TorusFunction::monomial(g, 1);
  auto h = analytic_complete(c);
  for (int j = 0; j < 64; ++j) EXPECT_LT(std::abs(h[j] - e1[j]), 1e-13);

  auto u = TorusFunction::sample(g, [](double t) { return std::cos(2 * t) + std::cos(5 * t); });
  auto h2 = analytic_complete(u);
  for (int j = 0; j < 64; ++j) {
    const cplx want = std::polar(1.0, 2 * g.angle(j)) + std::polar(1.0, 5 * g.angle(j));
    EXPECT_LT(std::abs(h2[j] - want), 1e-12);
  }
  EXPECT_THROW(analytic_complete(u + cplx(0.1)), Error);
}

TEST(AnalyticComplete, RandomEvenInputHasOnlyPositiveFrequencies) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_poly(rng, 30, true, false, true);
    for (int n = 1; n <= p.deg; ++n) p.c[p.deg - n] = p.c[p.deg + n] = p.c[p.deg + n].real();
    auto h = analytic_complete(from_poly(256, p));
    auto vals = std::vector<cplx>(h.values().begin(), h.values().end());
    for (int n = -127; n <= 0; ++n) EXPECT_LT(std::abs(oracle::coeff(vals, n)), 1e-12);
    EXPECT_TRUE(is_analytic(h));
  }
}

TEST(AnalyticComplete, L2NormIsRootTwoTimesImaginaryPart) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ang(0, 2 * kPi);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = oracle::random_poly(rng, 25, false, false, true);
    auto h = analytic_complete(from_poly(256, p));
    const cplx w = std::polar(1.0, ang(rng));
    auto im = h.map([w](cplx z) { return (w * z).imag(); });
    EXPECT_NEAR(norm_l2(h), std::sqrt(2.0) * norm_l2(im), 1e-10 * norm_l2(h));
  }
}

TEST(EvenOddSplit, Examples) {
  TorusGrid g(32);
  auto [u, v] = even_odd_split(TorusFunction::monomial(g, 1));
  for (int j = 0; j < 32; ++j) {
    EXPECT_LT(std::abs(u[j] - std::cos(g.angle(j))), 1e-14);
    EXPECT_LT(std::abs(v[j] - cplx(0, std::sin(g.angle(j)))), 1e-14);
  }
  auto even = TorusFunction::sample(g, [](double t) { return std::cos(3 * t) + 2.0; });
  EXPECT_LT(even_odd_split(even).second.sup_norm(), 1e-14);
}

TEST(EvenOddSplit, CosineSineDuality) {
  std::mt19937_64 rng(37);
  const int m = 256;
  TorusGrid g(m);
  auto cosf = TorusFunction::sample(g, [](double t) { return std::cos(t); });
  auto sinf = TorusFunction::sample(g, [](double t) { return std::sin(t); });
  for (int trial = 0; trial < 50; ++trial) {
    auto p = oracle::random_poly(rng, 32, false, true, true);
    auto [u, v] = even_odd_split(from_poly(m, p));
    const cplx lhs = integrate(u * cosf);
    const cplx rhs = cplx(0, -1) * integrate(v * sinf);
    EXPECT_LT(std::abs(lhs - rhs), 1e-10);
  }
}

TEST(OuterFunction, ConstantInputs) {
  TorusGrid g(512);
  for (double c : {0.0, 0.125, 0.25, 0.375, 0.5}) {
    auto q = outer_function(TorusFunction::constant(g, c));
    for (int j = 0; j < 512; ++j) EXPECT_EQ(q[j], cplx(1.0 - c, 0.0));
  }
}

TEST(OuterFunction, SmoothEvenInput) {
  TorusGrid g(1024);
  auto p = TorusFunction::sample(g, [](double t) { return 0.25 * (1 + std::cos(t)) / 2; });
  auto q = outer_function(p);
  for (int j = 0; j < 1024; ++j) {
    EXPECT_NEAR(p[j].real() + std::abs(q[j]), 1.0, 1e-12);
    // Im q is odd
    EXPECT_NEAR(q[j].imag(), -q[g.reflect(j)].imag(), 1e-12);
  }
  EXPECT_LT(std::abs(integrate(q.imag())), 1e-12);
  // H log(1 - p) against a termwise oracle on a finer reference grid
  std::vector<cplx> logp(1024);
  for (int j = 0; j < 1024; ++j) logp[j] = std::log1p(-p[j].real());
  double worst = 0;
  for (int j = 0; j < 1024; j += 37) {
    cplx hl = 0;
    for (int n = 1; n < 512; ++n) {
      const cplx c = oracle::coeff(logp, n);
      hl += cplx(0, -1) * c * std::polar(1.0, n * g.angle(j)) + cplx(0, 1) * std::conj(c) * std::polar(1.0, -n * g.angle(j));
    }
    worst = std::max(worst, std::abs(std::arg(q[j]) - hl.real()));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(OuterFunction, RejectsOutOfRange) {
  TorusGrid g(64);
  EXPECT_THROW(outer_function(TorusFunction::constant(g, 0.6)), Error);
  EXPECT_THROW(outer_function(TorusFunction::constant(g, -0.01)), Error);
  EXPECT_THROW(outer_function(TorusFunction::constant(g, cplx(0.2, 0.1))), Error);
  EXPECT_NO_THROW(outer_function(TorusFunction::constant(g, 0.5 + 1e-12)));
}

TEST(Fejer, Examples) {
  TorusGrid g(64);
  for (int a : {1, 4, 16, 31}) {
    auto F = fejer_kernel(g, a);
    EXPECT_NEAR(integrate(F).real(), 1.0, 1e-12);
    for (int j = 0; j < 64; ++j) EXPECT_GT(F[j].real(), -1e-10);
    for (int n = -31; n <= 31; ++n) {
      const double want = std::abs(n) <= a ? 1.0 - std::abs(n) / (a + 1.0) : 0.0;
      EXPECT_NEAR(std::abs(F.coeff(n) - want), 0.0, 1e-12);
    }
  }
  auto F1 = fejer_kernel(g, 1);
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(std::abs(F1[j] - (1.0 + std::cos(g.angle(j)))), 0.0, 1e-13);
  EXPECT_THROW(fejer_kernel(g, 32), Error);
}

TEST(SignRe, Examples) {
  for (int m : {4, 16, 1024}) {
    TorusGrid g(m);
    auto s = sign_re(g);
    EXPECT_LT(std::abs(integrate(s)), 1e-12);
    auto sinf = TorusFunction::sample(g, [](double t) { return std::sin(t); });
    EXPECT_LT(std::abs(integrate(s * sinf)), 1e-12);
    for (int j = 0; j < m; ++j) EXPECT_EQ(std::abs(s[j].real()), 1.0);
  }
  TorusGrid g(1024);
  auto cosf = TorusFunction::sample(g, [](double t) { return std::cos(t); });
  EXPECT_NEAR(inner(cosf, sign_re(g)).real(), 2.0 / kPi, 1e-5);
}

TEST(DiskEval, Examples) {
  TorusGrid g(32);
  EXPECT_LT(std::abs(disk_eval(TorusFunction::monomial(g, 1), 0.5) - 0.5), 1e-14);
  const cplx w(0.3, 0.4);
  EXPECT_LT(std::abs(disk_eval(TorusFunction::monomial(g, 2), w) - w * w), 1e-14);
  std::mt19937_64 rng(41);
  auto h = from_poly(32, oracle::random_poly(rng, 4, false, true, true));
  EXPECT_LT(std::abs(disk_eval(h, 0.0)), 1e-15);
  EXPECT_THROW(disk_eval(TorusFunction::sample(g, [](double t) { return std::cos(t); }), 0.1), Error);
  EXPECT_THROW(disk_eval(TorusFunction::monomial(g, 1), 1.5), Error);
}

TEST(DiskEval, MatchesPowerSeriesOracle) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_poly(rng, 8, false, true, true);
    auto h = from_poly(64, p);
    const cplx w(u(rng), u(rng));
    cplx want = 0;
    for (int n = 1; n <= 8; ++n) want += p.c[n + p.deg] * std::pow(w, n);
    EXPECT_LT(std::abs(disk_eval(h, w) - want), 1e-12);
    // on the boundary it reproduces the samples
    EXPECT_LT(std::abs(disk_eval(h, std::polar(1.0, h.grid().angle(5))) - h[5]), 1e-12);
  }
}

TEST(Convolve, Examples) {
  TorusGrid g(64);
  auto e1 = TorusFunction::monomial(g, 1);
  for (int a : {1, 3, 10}) {
    auto out = convolve(fejer_kernel(g, a), e1);
    for (int j = 0; j < 64; ++j) EXPECT_LT(std::abs(out[j] - (1.0 - 1.0 / (a + 1)) * e1[j]), 1e-13);
  }
  std::mt19937_64 rng(47);
  auto f = from_poly(64, oracle::random_poly(rng, 10, false, false, false));
  auto c = convolve(f, TorusFunction::constant(g, 1.0));
  for (int j = 0; j < 64; ++j) EXPECT_LT(std::abs(c[j] - integrate(f)), 1e-13);
  EXPECT_THROW(convolve(f, TorusFunction::constant(TorusGrid(32), 1.0)), Error);
}

TEST(Convolve, FejerSmoothingOfSignImproves) {
  TorusGrid g(1024);
  auto s = sign_re(g);
  double prev = 1e9;
  for (int a : {4, 16, 64}) {
    const double err = norm_l1(convolve(fejer_kernel(g, a), s) - s);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(Dilate, MovesCoefficients) {
  TorusGrid g(256);
  auto F = fejer_kernel(g, 3);
  auto D = dilate(F, 5);
  for (int j = 0; j < 256; ++j) {
    cplx want = 0;
    for (int n = -3; n <= 3; ++n) want += (1.0 - std::abs(n) / 4.0) * std::polar(1.0, 5.0 * n * g.angle(j));
    EXPECT_LT(std::abs(D[j] - want), 1e-12);
  }
  EXPECT_THROW(dilate(F, 50), Error);
}

TEST(Serialization, JsonRoundTrip) {
  std::mt19937_64 rng(53);
  auto f = from_poly(16, oracle::random_poly(rng, 3, false, false, false));
  auto j = to_json(f);
  EXPECT_EQ(j.at("m").get<int>(), 16);
  auto back = torus_from_json(nlohmann::json::parse(j.dump()));
  for (int k = 0; k < 16; ++k) EXPECT_EQ(back[k], f[k]);
  EXPECT_THROW(torus_from_json(nlohmann::json{{"m", 16}}), Error);
}
