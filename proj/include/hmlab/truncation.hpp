#pragma once

// Monte-Carlo Varopoulos truncation.  Brownian paths start at 0 and run until
// they leave the unit disk (tau) or until |h(B)| first exceeds C0 |z| (rho).
// The boundary function g(e^{i theta}) = E(h(B_{rho ^ tau}) | B_tau) is
// estimated by binning exit angles and then projected onto analytic
// mean-zero polynomials.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "json.hpp"

#include "hmlab/error.hpp"
#include "hmlab/parallel.hpp"
#include "hmlab/report.hpp"
#include "hmlab/rng.hpp"
#include "hmlab/torus.hpp"

namespace hmlab {

struct TruncationConfig {
  double dt = 1e-4;
  int n_paths = 20000;
  long max_steps = 0;  // 0 means 10 * ceil(1/dt)
  double C0 = 34.0;
  std::uint64_t seed = 1;
  int bins = 0;               // 0 means the grid size of h
  int projection_degree = 0;  // 0 means bins/4
  int threads = 0;            // 0 means all hardware threads
  bool force_simulation = false;
  std::vector<double> radial_levels{0.25, 0.5, 0.75, 0.9, 0.97};

  long effective_max_steps() const {
    return max_steps > 0 ? max_steps : 10 * static_cast<long>(std::ceil(1.0 / dt));
  }

  void validate() const {
    if (!(dt > 0)) fail(Errc::InvalidConfig, "dt must be positive");
    if (n_paths < 100) fail(Errc::InvalidConfig, "n_paths must be at least 100");
    if (!(C0 >= 1)) fail(Errc::InvalidConfig, "C0 must be at least 1");
    if (bins != 0 && (bins < 4 || (bins & (bins - 1)) != 0))
      fail(Errc::InvalidConfig, "bins must be a power of two >= 4");
    for (double r : radial_levels)
      if (!(r >= 0 && r <= 1)) fail(Errc::InvalidConfig, "radial levels must lie in [0, 1]");
  }
};

inline nlohmann::json to_json(const TruncationConfig& c) {
  return {{"dt", c.dt},           {"n_paths", c.n_paths},
          {"max_steps", c.effective_max_steps()}, {"C0", c.C0},
          {"seed", c.seed},       {"bins", c.bins},
          {"projection_degree", c.projection_degree}, {"force_simulation", c.force_simulation}};
}

struct TruncationResult {
  TorusFunction g_hat;              // projected estimate on the grid of h
  TorusFunction g_binned;           // per-bin means on the bin grid, before projection
  std::vector<double> g_se;         // standard error of g_hat at each node
  std::vector<double> bin_se;       // standard error of each bin mean (complex modulus)
  std::vector<long> bin_counts;
  double hit_fraction = 0;          // estimate of P(rho < tau)
  double hit_se = 0;
  long paths_truncated_at_max = 0;
  long n_simulated = 0;
  bool fast_path = false;
  bool degenerate = false;
  double level = 0;                 // C0 |z|
  double wall_seconds = 0;

  // (1/m) sum_j se_j, the standard error used for integrals of |h - g|.
  double mean_se() const {
    if (g_se.empty()) return 0.0;
    double s = 0;
    for (double x : g_se) s += x;
    return s / g_se.size();
  }
};

inline nlohmann::json to_json(const TruncationResult& r, const TruncationConfig& cfg) {
  nlohmann::json bins = nlohmann::json::array();
  for (int j = 0; j < r.g_binned.size(); ++j)
    bins.push_back({{"mean", {r.g_binned[j].real(), r.g_binned[j].imag()}},
                    {"count", r.bin_counts.empty() ? 0 : r.bin_counts[j]},
                    {"se", r.bin_se.empty() ? 0.0 : r.bin_se[j]}});
  return {{"config", to_json(cfg)},
          {"hit_fraction", r.hit_fraction},
          {"hit_se", r.hit_se},
          {"paths_truncated_at_max", r.paths_truncated_at_max},
          {"fast_path", r.fast_path},
          {"degenerate", r.degenerate},
          {"level", r.level},
          {"bins", std::move(bins)},
          {"g_hat", to_json(r.g_hat)},
          {"wall_seconds", r.wall_seconds}};
}

// Max of |h| over circles r e^{i theta}, r in radial_levels and r = 1, with
// the angle oversampled eight times relative to the grid.
inline double max_modulus_in_disk(const TorusFunction& h, const std::vector<double>& radial_levels) {
  AnalyticPolynomial P(h);
  if (P.is_zero()) return 0.0;
  const int n = 8 * h.size();
  double best = 0;
  auto scan = [&](double r) {
    for (int j = 0; j < n; ++j) {
      const double t = kPi * (2.0 * j + 1.0) / n;
      double vr, vi;
      P.eval(r * std::cos(t), r * std::sin(t), vr, vi);
      best = std::max(best, std::hypot(vr, vi));
    }
  };
  scan(1.0);
  for (double r : radial_levels) scan(r);
  return best;
}

// Average of h over each exit bin [2 pi j/bins, 2 pi (j+1)/bins): the exact
// bin mean of h(B_tau) when nothing stops, since the exit law is uniform.
inline TorusFunction bin_average(const TorusFunction& h, int bins) {
  const TorusGrid bg(bins);
  const int N = h.size() / 2;
  std::vector<cplx> c(N);
  for (int n = 1; n < N; ++n) c[n] = h.coeff(n);
  return TorusFunction::sample(bg, [&](double t) {
    cplx s = 0;
    for (int n = 1; n < N; ++n) {
      if (c[n] == 0.0) continue;
      const double x = kPi * n / bins;
      s += c[n] * std::polar(std::sin(x) / x, n * t);
    }
    return s;
  });
}

namespace detail {

struct PathOutcome {
  int bin = 0;
  double re = 0, im = 0;  // recorded value h(B_{rho ^ tau})
  bool stopped = false;
  bool capped = false;
};

// Exit point of Brownian motion started at a, sampled exactly from harmonic
// measure: the Mobius map z -> (z + a)/(1 + conj(a) z) carries the uniform
// law on the circle to the exit law from a.
inline void harmonic_exit(double ax, double ay, std::mt19937_64& rng, double& ex, double& ey) {
  const double phi = 2 * kPi * uniform01(rng);
  const double zr = std::cos(phi), zi = std::sin(phi);
  const double nr = zr + ax, ni = zi + ay;
  const double dr = 1.0 + ax * zr + ay * zi, di = ax * zi - ay * zr;
  const double den = dr * dr + di * di;
  ex = (nr * dr + ni * di) / den;
  ey = (ni * dr - nr * di) / den;
  const double r = std::hypot(ex, ey);
  ex /= r;
  ey /= r;
}

inline int angle_bin(double x, double y, int bins) {
  double a = std::atan2(y, x);
  if (a < 0) a += 2 * kPi;
  int b = static_cast<int>(a / (2 * kPi) * bins);
  return std::min(std::max(b, 0), bins - 1);
}

inline PathOutcome simulate_path(const AnalyticPolynomial& P, double level2, const TruncationConfig& cfg,
                                 int bins, long max_steps, std::uint64_t path) {
  auto rng = make_stream(cfg.seed, {path});
  boost::random::normal_distribution<double> nd(0.0, std::sqrt(cfg.dt));  // ziggurat
  PathOutcome out;
  double x = 0, y = 0;
  for (long step = 0; step < max_steps; ++step) {
    const double dx = nd(rng), dy = nd(rng);
    const double nx = x + dx, ny = y + dy;
    if (nx * nx + ny * ny >= 1.0) {
      // linear interpolation of the crossing
      const double a = dx * dx + dy * dy, b = 2 * (x * dx + y * dy), c = x * x + y * y - 1.0;
      const double t = (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);
      double ex = x + t * dx, ey = y + t * dy;
      const double r = std::hypot(ex, ey);
      ex /= r;
      ey /= r;
      P.eval(ex, ey, out.re, out.im);
      out.bin = angle_bin(ex, ey, bins);
      return out;
    }
    double vr, vi;
    P.eval(nx, ny, vr, vi);
    if (vr * vr + vi * vi > level2) {
      out.stopped = true;
      out.re = vr;
      out.im = vi;
      double ex, ey;
      harmonic_exit(nx, ny, rng, ex, ey);
      out.bin = angle_bin(ex, ey, bins);
      return out;
    }
    x = nx;
    y = ny;
  }
  // Step cap reached inside the disk: finish with the exact exit law and
  // treat the remainder as unstopped.
  out.capped = true;
  double ex, ey;
  harmonic_exit(x, y, rng, ex, ey);
  P.eval(ex, ey, out.re, out.im);
  out.bin = angle_bin(ex, ey, bins);
  return out;
}

}  // namespace detail

inline TruncationResult truncate(const TorusFunction& h, cplx z, const TruncationConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int m = h.size();
  const int bins = cfg.bins > 0 ? cfg.bins : m;
  const int D = cfg.projection_degree > 0 ? cfg.projection_degree : bins / 4;
  if (2 * D >= m || D >= bins / 2) fail(Errc::InvalidConfig, "projection degree too large for the grid");
  AnalyticPolynomial P(h);
  const TorusGrid bin_grid(bins);
  const double level = cfg.C0 * std::abs(z);

  TruncationResult res{h, TorusFunction::constant(bin_grid, 0.0), std::vector<double>(m, 0.0), {}, {}};
  res.level = level;

  auto finish = [&] {
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };

  if (!cfg.force_simulation) {
    if (P.is_zero() || max_modulus_in_disk(h, cfg.radial_levels) <= level) {
      res.fast_path = true;
      return finish();
    }
    if (std::abs(z) == 0.0) {
      // every path stops at time 0+ with h(B) ~ 0, so g = 0
      res.degenerate = true;
      res.g_hat = TorusFunction::constant(h.grid(), 0.0);
      res.hit_fraction = 1.0;
      return finish();
    }
  }

  const long max_steps = cfg.effective_max_steps();
  std::vector<detail::PathOutcome> outcomes(cfg.n_paths);
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t i) {
    outcomes[i] = detail::simulate_path(P, level * level, cfg, bins, max_steps, i);
  });

  // reduction in path order
  std::vector<cplx> sum(bins, 0.0);
  std::vector<double> sum2(bins, 0.0);
  std::vector<long> count(bins, 0);
  long hits = 0, capped = 0;
  for (const auto& o : outcomes) {
    sum[o.bin] += cplx(o.re, o.im);
    sum2[o.bin] += o.re * o.re + o.im * o.im;
    ++count[o.bin];
    hits += o.stopped;
    capped += o.capped;
  }
  std::vector<cplx> mean(bins, 0.0);
  std::vector<double> se(bins, 0.0);
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) {
      se[b] = level;  // no information in this bin
      continue;
    }
    mean[b] = sum[b] / static_cast<double>(count[b]);
    if (count[b] > 1) {
      const double var = (sum2[b] - count[b] * std::norm(mean[b])) / (count[b] - 1);
      se[b] = std::sqrt(std::max(var, 0.0) / count[b]);
    } else {
      se[b] = std::abs(mean[b]);
    }
  }
  res.g_binned = TorusFunction(bin_grid, mean);
  res.bin_counts = count;
  res.bin_se = se;
  res.n_simulated = cfg.n_paths;
  res.hit_fraction = static_cast<double>(hits) / cfg.n_paths;
  res.hit_se = std::sqrt(res.hit_fraction * (1 - res.hit_fraction) / cfg.n_paths);
  res.paths_truncated_at_max = capped;

  // projection onto span{e^{i n theta}: 1 <= n <= D}, resampled on the grid of h
  {
    const int N = m / 2;
    std::vector<cplx> c(2 * N + 1, 0.0);
    for (int n = 1; n <= D; ++n) c[n + N] = res.g_binned.coeff(n);
    res.g_hat = TorusFunction::from_coefficients(h.grid(), c);
  }
  // Var g_hat(theta_i) = sum_b |K(theta_i - phi_b)|^2 se_b^2 with
  // K(t) = (1/bins) sum_{n=1}^D e^{i n t}.
  for (int i = 0; i < m; ++i) {
    double var = 0;
    const double ti = h.grid().angle(i);
    for (int b = 0; b < bins; ++b) {
      const double t = ti - bin_grid.angle(b);
      // |sum_{n=1}^D e^{int}| = |sin(D t/2) / sin(t/2)|
      const double s = std::sin(0.5 * t);
      const double k = std::abs(s) < 1e-12 ? D : std::abs(std::sin(0.5 * D * t) / s);
      var += (k / bins) * (k / bins) * se[b] * se[b];
    }
    res.g_se[i] = std::sqrt(var);
  }
  return finish();
}

// |z| + (1/4) int |h - g| <= int |z + h - b sigma|; flagged only below -2 SE.
inline SlackReport verify_truncation(const TorusFunction& h, cplx z, cplx b, const TorusFunction& g_hat,
                                     double g_mean_se = 0.0) {
  require_same_grid(h.grid(), g_hat.grid());
  const TorusGrid& grid = h.grid();
  double lhs_int = 0, rhs = 0;
  for (int j = 0; j < grid.size(); ++j) {
    lhs_int += std::abs(h[j] - g_hat[j]);
    rhs += std::abs(z + h[j] - b * grid.sign_cos(j));
  }
  SlackReport r;
  r.lhs = std::abs(z) + 0.25 * lhs_int / grid.size();
  r.rhs = rhs / grid.size();
  r.slack = r.rhs - r.lhs;
  r.se = 0.25 * g_mean_se;
  r.violated = r.slack < -2.0 * r.se - 1e-12 * std::max(1.0, r.rhs);
  return r;
}

inline SlackReport verify_truncation(const TorusFunction& h, cplx z, cplx b, const TruncationResult& res) {
  return verify_truncation(h, z, b, res.g_hat, res.mean_se());
}

}  // namespace hmlab
