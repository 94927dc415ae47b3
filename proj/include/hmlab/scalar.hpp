#pragma once

// Exact finite-dimensional inequalities behind the martingale estimates:
// the arithmetic lemma for a = |mu| + |mu - b|^2 / (|mu| + |b|), the
// square-root lower bound for int |z + g| with a bounded mean-zero g, its
// perturbation by a sign function b*sigma, and the even-part identity on
// the torus.

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hmlab/error.hpp"
#include "hmlab/report.hpp"
#include "hmlab/torus.hpp"

namespace hmlab {

struct ScalarLemmaSlack {
  double a = 0;
  double slack_e = 0;  // 4(Im^2(w(mu-b)) + Re^2(w mu)) - (a - |b|)^2
  double slack_d = 0;  // 2(a^2 - |mu|^2) - |mu - b|^2
};

inline double lemma_a(cplx mu, cplx b) {
  return std::abs(mu) + std::norm(mu - b) / (std::abs(mu) + std::abs(b));
}

inline ScalarLemmaSlack scalar_lemma_check(cplx mu, cplx b, cplx w) {
  if (mu == 0.0 && b == 0.0) fail(Errc::RangeError, "scalar lemma needs (mu, b) != (0, 0)");
  if (std::abs(std::abs(w) - 1.0) > 1e-12) fail(Errc::RangeError, "w must be unimodular");
  ScalarLemmaSlack s;
  s.a = lemma_a(mu, b);
  const double im = (w * (mu - b)).imag(), re = (w * mu).real();
  const double amb = s.a - std::abs(b);
  s.slack_e = 4 * (im * im + re * re) - amb * amb;
  s.slack_d = 2 * (s.a * s.a - std::norm(mu)) - std::norm(mu - b);
  return s;
}

// alpha(A) from the proof with M = 2A + 1: int|1 + g/M| >= 1 + int v^2 / (6(M+A)^2)
// and 1 + x >= sqrt(1 + 2x) give alpha^2 = 1 / (3 (3A + 1)^2).
inline double alpha_for_bound(double A) {
  if (!(A > 0)) fail(Errc::RangeError, "bound A must be positive");
  return 1.0 / (std::sqrt(3.0) * (3 * A + 1));
}

// delta(alpha, C) for the sign-perturbed version: with A' = 4C/alpha the
// first case applies alpha_for_bound(C + A'), the second case needs
// delta <= 1/(C + A'), which the first value already satisfies.
inline double delta_for_regular(double alpha, double C) {
  if (!(alpha > 0 && alpha <= 1)) fail(Errc::RangeError, "alpha must lie in (0, 1]");
  if (!(C >= 1)) fail(Errc::RangeError, "C must be at least 1");
  return alpha_for_bound(C + 4 * C / alpha);
}

namespace detail {
inline void require_bounded_mean_zero(std::span<const cplx> g, double bound, const char* what) {
  cplx mean = 0;
  double sup = 0;
  for (cplx x : g) {
    mean += x;
    sup = std::max(sup, std::abs(x));
  }
  mean /= static_cast<double>(g.size());
  const double scale = std::max(1.0, sup);
  if (std::abs(mean) > 1e-12 * scale) fail(Errc::RangeError, std::string(what) + " must have mean zero");
  if (sup > bound * (1 + 1e-12) + 1e-300)
    fail(Errc::RangeError, std::string(what) + " exceeds its modulus bound");
}
}  // namespace detail

// (|z|^2 + alpha^2 int y^2)^{1/2} <= int |z + g| on an equally weighted
// sample space, y = Im(g w), w = conj(z)/|z|.  Requires |g| <= A|z|, int g = 0.
inline SlackReport prop_scalar_check(cplx z, std::span<const cplx> g, double A, double alpha) {
  if (g.empty()) fail(Errc::RangeError, "empty sample space");
  if (z == 0.0) fail(Errc::RangeError, "z must be nonzero");
  detail::require_bounded_mean_zero(g, A * std::abs(z), "g");
  const cplx w = std::conj(z) / std::abs(z);
  double y2 = 0, rhs = 0;
  for (cplx x : g) {
    const double y = (x * w).imag();
    y2 += y * y;
    rhs += std::abs(z + x);
  }
  const double n = static_cast<double>(g.size());
  SlackReport r;
  r.lhs = std::sqrt(std::norm(z) + alpha * alpha * y2 / n);
  r.rhs = rhs / n;
  r.slack = r.rhs - r.lhs;
  r.violated = r.slack < -1e-9 * std::max(1.0, r.rhs);
  return r;
}

// Variant with a sign-like sigma: int sigma = 0, |sigma| <= 1,
// int |sigma|^2 > alpha_reg; y = Im((g - b sigma) w).
inline SlackReport perturbed_scalar_check(cplx z, cplx b, std::span<const cplx> g, std::span<const cplx> sigma,
                                          double C, double alpha_reg, double delta) {
  if (g.size() != sigma.size() || g.empty()) fail(Errc::RangeError, "g and sigma must share a sample space");
  if (z == 0.0) fail(Errc::RangeError, "z must be nonzero");
  detail::require_bounded_mean_zero(g, C * std::abs(z), "g");
  detail::require_bounded_mean_zero(sigma, 1.0, "sigma");
  double s2 = 0;
  for (cplx s : sigma) s2 += std::norm(s);
  if (!(s2 / sigma.size() > alpha_reg)) fail(Errc::RangeError, "int |sigma|^2 must exceed alpha");
  const cplx w = std::conj(z) / std::abs(z);
  double y2 = 0, rhs = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const cplx v = g[i] - b * sigma[i];
    const double y = (v * w).imag();
    y2 += y * y;
    rhs += std::abs(z + v);
  }
  const double n = static_cast<double>(g.size());
  SlackReport r;
  r.lhs = std::sqrt(std::norm(z) + delta * delta * y2 / n);
  r.rhs = rhs / n;
  r.slack = r.rhs - r.lhs;
  r.violated = r.slack < -1e-9 * std::max(1.0, r.rhs);
  return r;
}

enum class SampleShape { Gaussian, TwoPoint, Unimodular, Sparse };

inline const char* to_string(SampleShape s) {
  switch (s) {
    case SampleShape::Gaussian: return "gaussian";
    case SampleShape::TwoPoint: return "two_point";
    case SampleShape::Unimodular: return "unimodular";
    case SampleShape::Sparse: return "sparse";
  }
  return "?";
}

// Mean-zero sample of size n with max modulus exactly `bound` times a
// uniform fill factor in (0, 1].
inline std::vector<cplx> sample_mean_zero(std::mt19937_64& rng, int n, double bound, SampleShape shape) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::vector<cplx> g(n);
  switch (shape) {
    case SampleShape::Gaussian:
      for (auto& x : g) x = {nd(rng), nd(rng)};
      break;
    case SampleShape::TwoPoint: {
      // values c1 with probability p, c2 otherwise, p c1 + (1-p) c2 = 0
      const int k = 1 + static_cast<int>(ud(rng) * (n - 1));
      const cplx c1{nd(rng), nd(rng)};
      const cplx c2 = -c1 * (static_cast<double>(k) / (n - k));
      for (int i = 0; i < n; ++i) g[i] = i < k ? c1 : c2;
      break;
    }
    case SampleShape::Unimodular:
      for (auto& x : g) x = std::polar(1.0, 2 * kPi * ud(rng));
      break;
    case SampleShape::Sparse:
      for (auto& x : g) x = ud(rng) < 0.1 ? cplx(nd(rng), nd(rng)) : cplx(0.0);
      break;
  }
  cplx mean = 0;
  for (cplx x : g) mean += x;
  mean /= static_cast<double>(n);
  double sup = 0;
  for (auto& x : g) {
    x -= mean;
    sup = std::max(sup, std::abs(x));
  }
  if (sup == 0) return g;
  const double fill = 0.05 + 0.95 * ud(rng);
  for (auto& x : g) x *= bound * fill / sup;
  return g;
}

struct IdentityResidual {
  double lhs = 0;
  double rhs = 0;
  double residual = 0;  // |lhs - rhs| / max(1, |rhs|)
};

// Im^2(w(<u,sigma> - b)) + Re^2(w <u,sigma>) + int |u - <u,sigma> sigma|^2
//   = int Im^2(w (h - b sigma))
// with u the even part of h.
inline IdentityResidual cosine_identity_check(const TorusFunction& h, cplx w, cplx b) {
  require_analytic(h);
  if (std::abs(std::abs(w) - 1.0) > 1e-12) fail(Errc::RangeError, "w must be unimodular");
  const TorusGrid& g = h.grid();
  const auto [u, v] = even_odd_split(h);
  cplx c1 = 0;
  for (int j = 0; j < g.size(); ++j) c1 += u[j] * g.sign_cos(j);
  c1 /= static_cast<double>(g.size());
  double rest = 0, rhs = 0;
  for (int j = 0; j < g.size(); ++j) {
    rest += std::norm(u[j] - c1 * g.sign_cos(j));
    const double y = (w * (h[j] - b * g.sign_cos(j))).imag();
    rhs += y * y;
  }
  IdentityResidual r;
  const double a = (w * (c1 - b)).imag(), c = (w * c1).real();
  r.lhs = a * a + c * c + rest / g.size();
  r.rhs = rhs / g.size();
  r.residual = std::abs(r.lhs - r.rhs) / std::max(1.0, std::abs(r.rhs));
  return r;
}

// Slice form of the two estimates that merge the lemma with the identity:
//   int|u - b sigma|^2 <= 8(a^2 - |<u,sigma>|^2) + int|u - <u,sigma>sigma|^2
//   (a - |b|)^2 + int|u - <u,sigma>sigma|^2 <= 8 int Im^2(w(h - b sigma))
struct EvenPartSlack {
  double slack_b = 0;
  double slack_w = 0;
  double scale = 1;
};

inline EvenPartSlack even_part_estimates(const TorusFunction& h, cplx w, cplx b) {
  const TorusGrid& g = h.grid();
  const auto [u, v] = even_odd_split(h);
  cplx c1 = 0;
  for (int j = 0; j < g.size(); ++j) c1 += u[j] * g.sign_cos(j);
  c1 /= static_cast<double>(g.size());
  double ub = 0, rest = 0, im2 = 0;
  for (int j = 0; j < g.size(); ++j) {
    const double s = g.sign_cos(j);
    ub += std::norm(u[j] - b * s);
    rest += std::norm(u[j] - c1 * s);
    const double y = (w * (h[j] - b * s)).imag();
    im2 += y * y;
  }
  const double n = g.size();
  ub /= n;
  rest /= n;
  im2 /= n;
  EvenPartSlack r;
  if (c1 == 0.0 && b == 0.0) {
    // a is 0 by continuity
    r.slack_b = rest - ub;
    r.slack_w = 8 * im2 - rest;
  } else {
    const double a = lemma_a(c1, b);
    r.slack_b = 8 * (a * a - std::norm(c1)) + rest - ub;
    r.slack_w = 8 * im2 - (a - std::abs(b)) * (a - std::abs(b)) - rest;
  }
  r.scale = std::max({1.0, ub, 8 * im2});
  return r;
}

}  // namespace hmlab
