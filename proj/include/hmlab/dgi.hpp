#pragma once

// Davis-Garsia decomposition of a dyadically perturbed Hardy martingale by
// per-slice Brownian truncation, and the checks built on it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hmlab/martingale.hpp"
#include "hmlab/report.hpp"
#include "hmlab/rng.hpp"
#include "hmlab/scalar.hpp"
#include "hmlab/truncation.hpp"

namespace hmlab {

struct SliceRecord {
  int k = 0;
  std::size_t slice = 0;
  double z_abs = 0;
  double hit_fraction = 0;
  double se = 0;           // SE of int |h - g| for this slice
  double cap_excess = 0;   // max_y |g| - C0|z| - 3 se(y); <= 0 means the cap holds
  bool fast_path = false;
  bool degenerate = false;
};

struct DecompositionReport {
  Martingale F, D, G, B;
  TruncationConfig cfg;
  std::vector<ProductFunction> step_slack;  // arity k-1, real part holds the slack
  std::vector<ProductFunction> step_se;     // matching 1/4 SE of E_{k-1}|dB_k|
  std::vector<SliceRecord> slices;
  double B_A_se = 0;                        // SE of ||B||_A
  double wall_seconds = 0;

  std::size_t slice_total() const { return slices.size(); }
  std::size_t simulated_slices() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += !s.fast_path && !s.degenerate;
    return n;
  }
  // Fraction of slices with slack >= -2 SE (plus rounding).
  double step_pass_fraction() const {
    std::size_t ok = 0, total = 0;
    for (std::size_t k = 0; k < step_slack.size(); ++k)
      for (std::size_t i = 0; i < step_slack[k].size(); ++i) {
        ++total;
        if (step_slack[k][i].real() >= -2 * step_se[k][i].real() - 1e-10) ++ok;
      }
    return total ? static_cast<double>(ok) / total : 1.0;
  }
  double cap_pass_fraction() const {
    if (slices.empty()) return 1.0;
    std::size_t ok = 0;
    for (const auto& s : slices) ok += s.cap_excess <= 1e-10;
    return static_cast<double>(ok) / slices.size();
  }
};

// slack(x) = E_{k-1}|F_k - D_k| - |F_{k-1} - D_{k-1}| - 1/4 E_{k-1}|dB_k|
inline ProductFunction verify_step_inequality(const Martingale& F, const Martingale& D, const Martingale& B, int k) {
  if (F.depth() != D.depth() || F.depth() != B.depth()) fail(Errc::DepthMismatch, "depths differ");
  if (k < 1 || k > F.depth()) fail(Errc::RangeError, "step index out of range");
  auto absv = [](cplx z) { return cplx(std::abs(z), 0.0); };
  ProductFunction cur = cond_expect_prev((F.partial_sum(k) - D.partial_sum(k)).map(absv));
  ProductFunction prev = (F.partial_sum(k - 1) - D.partial_sum(k - 1)).map(absv);
  ProductFunction db = cond_expect_prev(B.diff(k).map(absv));
  return cur - prev - cplx(0.25) * db;
}

inline DecompositionReport decompose(const Martingale& F, const Martingale& D, const TruncationConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  require_same_grid(F.grid(), D.grid());
  if (F.depth() != D.depth()) fail(Errc::DepthMismatch, "F and D must have equal depth");
  if (!is_hardy(F)) fail(Errc::NotHardy, "F is not a Hardy martingale");
  if (!is_dyadic(D)) fail(Errc::NotDyadic, "D is not dyadic");
  cfg.validate();
  const TorusGrid grid = F.grid();
  const int m = grid.size(), n = F.depth();

  std::vector<ProductFunction> gdiffs;
  std::vector<SliceRecord> records;
  std::vector<std::vector<double>> slice_se(n + 1);
  for (int k = 1; k <= n; ++k) {
    const ProductFunction& dF = F.diff(k);
    const ProductFunction zk = F.partial_sum(k - 1) - D.partial_sum(k - 1);
    std::vector<cplx> g(dF.size());
    slice_se[k].assign(dF.slice_count(), 0.0);
    for (std::size_t s = 0; s < dF.slice_count(); ++s) {
      const TorusFunction h = dF.slice(s);
      const cplx z = zk[s];
      TruncationConfig c = cfg;
      c.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(k), s});
      const TruncationResult r = truncate(h, z, c);
      SliceRecord rec;
      rec.k = k;
      rec.slice = s;
      rec.z_abs = std::abs(z);
      rec.hit_fraction = r.hit_fraction;
      rec.se = r.mean_se();
      rec.fast_path = r.fast_path;
      rec.degenerate = r.degenerate;
      rec.cap_excess = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        g[s * m + j] = r.g_hat[j];
        rec.cap_excess = std::max(rec.cap_excess, std::abs(r.g_hat[j]) - cfg.C0 * std::abs(z) - 3 * r.g_se[j]);
      }
      slice_se[k][s] = rec.se;
      records.push_back(rec);
    }
    gdiffs.push_back(ProductFunction(grid, k, std::move(g)));
  }
  Martingale G(grid, F.start(), std::move(gdiffs));
  std::vector<ProductFunction> bdiffs;
  for (int k = 1; k <= n; ++k) bdiffs.push_back(F.diff(k) - G.diff(k));
  Martingale B(grid, 0.0, std::move(bdiffs));

  DecompositionReport rep{F, D, G, B, cfg, {}, {}, std::move(records), 0.0, 0.0};
  for (int k = 1; k <= n; ++k) {
    rep.step_slack.push_back(verify_step_inequality(F, D, B, k));
    std::vector<cplx> se(slice_se[k].size());
    double avg = 0;
    for (std::size_t s = 0; s < se.size(); ++s) {
      se[s] = 0.25 * slice_se[k][s];
      avg += slice_se[k][s];
    }
    rep.B_A_se += avg / se.size();
    rep.step_se.push_back(ProductFunction(grid, k - 1, std::move(se)));
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ||B||_A <= 4 ||F - D||_{L1} is asserted (with 3 SE of MC room); the
// transform ratios are reported.
inline ConstantsReport verify_dgi(const DecompositionReport& rep, std::uint64_t seed = 0,
                                  const std::string& suite = "dgi") {
  ConstantsReport out;
  const Martingale FD = rep.F - rep.D;
  const double fd_l1 = norm_L1(FD), fd_h1 = norm_H1(FD);
  const double b_a = norm_A(rep.B);

  // reconstruction F = G + B on the stored tensors
  double recon = 0;
  const Martingale GB = rep.G + rep.B;
  for (int k = 1; k <= rep.F.depth(); ++k)
    for (std::size_t i = 0; i < rep.F.diff(k).size(); ++i)
      recon = std::max(recon, std::abs(GB.diff(k)[i] - rep.F.diff(k)[i]));
  out.assert_row(suite, "reconstruction_F_eq_G_plus_B", recon, "max|G+B-F| <= 1e-9", -recon, 1e-9, seed);

  const double frac = rep.step_pass_fraction();
  out.assert_row(suite, "step_inequality_pass_fraction", frac, ">= 0.95 of slices within 2 SE", frac - 0.95, 0.0,
                 seed, "slices=" + std::to_string(rep.slice_total()));
  out.report_row(suite, "truncation_cap_pass_fraction", rep.cap_pass_fraction(), "|dG| <= C0|F-D| + 3 SE", seed);

  const double ratio_a = safe_ratio(b_a, fd_l1);
  const double allow = 4.0 + safe_ratio(3 * rep.B_A_se, fd_l1);
  out.assert_row(suite, "B_A_over_FD_L1", ratio_a, "<= 4 + 3 SE", allow - ratio_a, 1e-9, seed,
                 "se=" + fmt_num(rep.B_A_se));

  const SteeringWeights W = steering_weights(rep.F, rep.D);
  const double t_p = norm_P(transform(rep.G - rep.D, W));
  out.report_row(suite, "TW_GminusD_P_ratio", safe_ratio(t_p, std::sqrt(fd_l1 * fd_h1)),
                 "||T(G-D)||_P / (||F-D||_L1 ||F-D||_H1)^(1/2)", seed);
  out.report_row(suite, "G_P_ratio", safe_ratio(norm_P(rep.G), norm_L1(rep.F) + norm_H1(rep.D)),
                 "||G||_P / (||F||_L1 + ||D||_H1)", seed);
  out.report_row(suite, "simulated_slices", static_cast<double>(rep.simulated_slices()), "", seed);
  const std::vector<double> zf = zero_fiber_mass(rep.F, rep.D);
  std::string steps;
  for (std::size_t k = 0; k < zf.size(); ++k)
    if (zf[k] > 0) steps += (steps.empty() ? "w=1 at steps " : " ") + std::to_string(k + 1);
  out.report_row(suite, "zero_fiber_mass", *std::max_element(zf.begin(), zf.end()),
                 "max over steps of grid mass with F_{k-1} = D_{k-1}", seed, steps);
  return out;
}

// ---------------------------------------------------------------------------
// iteration principle

struct IterationInstance {
  // M[k] for k = 0..n, V[k-1] and w[k-1] for k = 1..n; all nonnegative
  // tensors of arity <= n on one grid.
  std::vector<ProductFunction> M, V, w;
  int depth() const { return static_cast<int>(V.size()); }
};

struct IterationResult {
  std::vector<double> hypothesis_slack;  // E M_k - E(M_{k-1}^2 + V_k^2)^{1/2} - E w_k
  bool hypothesis_holds = false;
  double conclusion_slack = std::numeric_limits<double>::quiet_NaN();
  double lhs = 0, rhs = 0;
};

inline IterationResult iteration_check(const IterationInstance& inst, double hypo_tol = 1e-12) {
  const int n = inst.depth();
  if (n < 1 || static_cast<int>(inst.M.size()) != n + 1 || static_cast<int>(inst.w.size()) != n)
    fail(Errc::RangeError, "iteration instance needs M_0..M_n, V_1..V_n, w_1..w_n");
  const TorusGrid grid = inst.M[0].grid();
  auto lift = [&](const ProductFunction& f) {
    require_same_grid(grid, f.grid());
    if (f.arity() > n) fail(Errc::ArityMismatch, "instance tensor arity exceeds depth");
    for (cplx z : f.values())
      if (z.real() < 0 || z.imag() != 0.0) fail(Errc::RangeError, "instance tensors must be nonnegative reals");
    return f.extend(n);
  };
  std::vector<ProductFunction> M, V, w;
  for (const auto& f : inst.M) M.push_back(lift(f));
  for (const auto& f : inst.V) V.push_back(lift(f));
  for (const auto& f : inst.w) w.push_back(lift(f));
  const std::size_t N = M[0].size();

  IterationResult r;
  r.hypothesis_holds = true;
  for (int k = 1; k <= n; ++k) {
    double lhs = 0, em = 0, ew = 0;
    for (std::size_t i = 0; i < N; ++i) {
      lhs += std::hypot(M[k - 1][i].real(), V[k - 1][i].real());
      em += M[k][i].real();
      ew += w[k - 1][i].real();
    }
    const double s = (em - lhs - ew) / N;
    r.hypothesis_slack.push_back(s);
    if (s < -hypo_tol * std::max(1.0, em / N)) r.hypothesis_holds = false;
  }
  double sq = 0, ws = 0, mn = 0, mx = 0;
  for (std::size_t i = 0; i < N; ++i) {
    double v2 = 0, top = 0;
    for (int k = 1; k <= n; ++k) {
      v2 += V[k - 1][i].real() * V[k - 1][i].real();
      ws += w[k - 1][i].real();
    }
    for (int k = 0; k <= n; ++k) top = std::max(top, M[k][i].real());
    sq += std::sqrt(v2);
    mn += M[n][i].real();
    mx += top;
  }
  r.lhs = (sq + ws) / N;
  r.rhs = 2 * std::sqrt(mn / N) * std::sqrt(mx / N);
  if (r.hypothesis_holds) r.conclusion_slack = r.rhs - r.lhs;
  return r;
}

// Random adapted instance on an m-point grid.  M_k is rescaled so that the
// hypothesis holds with slack `margin` (negative margins give violating
// instances).
inline IterationInstance random_iteration_instance(int m, int n, std::uint64_t seed, double margin = 0.0) {
  TorusGrid grid(m);
  auto rng = make_stream(seed, {0x17e4});
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto positive = [&](int arity, double scale) {
    return ProductFunction::from_indices(grid, arity, [&](std::span<const int>) { return cplx(scale * ex(rng)); });
  };
  IterationInstance inst;
  inst.M.push_back(positive(0, 1.0));
  for (int k = 1; k <= n; ++k) {
    inst.V.push_back(positive(k, ud(rng)));
    inst.w.push_back(positive(k, 0.2 * ud(rng)));
    ProductFunction shape = positive(k, 1.0);
    const ProductFunction prev = inst.M[k - 1].extend(k);
    double target = 0;
    for (std::size_t i = 0; i < shape.size(); ++i)
      target += std::hypot(prev[i].real(), inst.V[k - 1][i].real()) + inst.w[k - 1][i].real();
    target = target / shape.size() + margin;
    const double em = expectation(shape).real();
    inst.M.push_back(cplx(std::max(target, 0.0) / em) * shape);
  }
  return inst;
}

// Instance read off a decomposition: M_k = |F_k - D_k|,
// V_k = delta (E_{k-1} Y_k^2)^{1/2} with Y_k = Im(w_{k-1}(dG_k - dD_k)),
// w_k = 1/4 E_{k-1}|dB_k|.
inline IterationInstance iteration_instance_from(const DecompositionReport& rep, double delta) {
  const int n = rep.F.depth();
  IterationInstance inst;
  auto absv = [](cplx z) { return cplx(std::abs(z), 0.0); };
  for (int k = 0; k <= n; ++k) inst.M.push_back((rep.F.partial_sum(k) - rep.D.partial_sum(k)).map(absv));
  const SteeringWeights W = steering_weights(rep.F, rep.D);
  const Martingale Y = transform(rep.G - rep.D, W);
  for (int k = 1; k <= n; ++k) {
    ProductFunction y2 = cond_expect_prev(Y.diff(k).map([](cplx z) { return cplx(std::norm(z), 0.0); }));
    inst.V.push_back(y2.map([delta](cplx z) { return cplx(delta * std::sqrt(std::max(z.real(), 0.0)), 0.0); }));
    inst.w.push_back(cplx(0.25) * cond_expect_prev(rep.B.diff(k).map(absv)));
  }
  return inst;
}

// ---------------------------------------------------------------------------
// cosine/sine martingale estimates

// b_k = E_D E_{k-1}(u_k sigma_k) as a tensor of arity k-1.
inline ProductFunction dyadic_sigma_coefficient(const Martingale& U, int k) {
  const TorusGrid& g = U.grid();
  ProductFunction us = U.diff(k).along_axis(k - 1, [&g](std::span<cplx> line) {
    for (int j = 0; j < g.size(); ++j) line[j] *= g.sign_cos(j);
  });
  return dyadic_project(cond_expect_prev(us));
}

inline ConstantsReport cosine_estimate_check(const Martingale& G, const SteeringWeights& W, std::uint64_t seed = 0,
                                             const std::string& suite = "cosine") {
  if (!is_hardy(G)) fail(Errc::NotHardy, "cosine estimates need a Hardy martingale");
  ConstantsReport out;
  const Martingale U = cosine_part(G);
  const Martingale V = G - U;
  const Martingale EU = dyadic_project(U), EG = dyadic_project(G);
  const double u_res_P = norm_P(U - EU);
  const double t_p = norm_P(transform(G - EG, W));
  const double g_p = norm_P(G), g_h1 = norm_H1(G);

  // slice-level estimates with constant 8, at w = w_{k-1}(x), b = b_k(x)
  double worst_b = std::numeric_limits<double>::infinity(), worst_w = worst_b;
  for (int k = 1; k <= G.depth(); ++k) {
    const ProductFunction b = dyadic_sigma_coefficient(U, k);
    const ProductFunction& w = W.w[k - 1];
    for (std::size_t s = 0; s < G.diff(k).slice_count(); ++s) {
      const EvenPartSlack e = even_part_estimates(G.diff(k).slice(s), w[s], b[s]);
      worst_b = std::min(worst_b, e.slack_b / e.scale);
      worst_w = std::min(worst_w, e.slack_w / e.scale);
    }
  }
  out.assert_row(suite, "even_part_sigma_bound_slice", worst_b, "min relative slack, constant 8", worst_b, 1e-9, seed);
  out.assert_row(suite, "even_part_imag_bound_slice", worst_w, "min relative slack, constant 8", worst_w, 1e-9, seed);

  out.report_row(suite, "cosine_P_ratio", safe_ratio(u_res_P, std::sqrt(t_p * g_p)),
                 "||U-E_D U||_P / (||T_W(G-E_D G)||_P ||G||_P)^(1/2)", seed);
  const double rhs12a = std::sqrt(norm_H1(U - EU) * g_h1) + std::sqrt(norm_L1(G - EG) * g_h1);
  out.report_row(suite, "dyadic_part_H1_ratio", safe_ratio(norm_H1(EG), rhs12a),
                 "||E_D G||_H1 / (||U-E_D U||_H1^(1/2) ||G||_H1^(1/2) + ||G-E_D G||_L1^(1/2) ||G||_H1^(1/2))", seed);
  out.report_row(suite, "sine_projection_ratio", safe_ratio(norm_H1(projection_P(V)), std::sqrt(norm_L1(V) * norm_H1(V))),
                 "||P(V)||_H1 / (||V||_L1 ||V||_H1)^(1/2)", seed);
  return out;
}

// ---------------------------------------------------------------------------
// interpolatory pipeline: D = E_D F

struct InterpolatoryResult {
  ConstantsReport report;
  double dyadic_l1 = 0;      // ||E_D F||_L1
  double residual_l1 = 0;    // ||F - E_D F||_L1
  double f_l1 = 0;
  double ratio_alpha8 = 0;   // ||E_D F|| / (||F-E_D F||^{1/8} ||F||^{7/8})
  double A0 = 0;             // ||F|| / ||F - E_D F||
  bool dyadic_part_zero = false;
};

// E_D F with differences below 1e-12 of their step snapped to exact zero.
inline Martingale dyadic_part(const Martingale& F, bool* snapped = nullptr) {
  Martingale D = dyadic_project(F);
  std::vector<ProductFunction> d;
  bool all_zero = true;
  for (int k = 1; k <= F.depth(); ++k) {
    const double scale = F.diff(k).sup_norm();
    if (D.diff(k).sup_norm() <= 1e-12 * scale) {
      d.push_back(ProductFunction::zeros(F.grid(), k));
    } else {
      d.push_back(D.diff(k));
      all_zero = false;
    }
  }
  if (snapped) *snapped = all_zero && D.start() == 0.0;
  return Martingale(F.grid(), D.start(), std::move(d));
}

inline InterpolatoryResult interpolatory_pipeline(const Martingale& F, const TruncationConfig& cfg,
                                                  std::uint64_t seed = 0, const std::string& suite = "interpolatory") {
  if (!is_hardy(F)) fail(Errc::NotHardy, "interpolatory pipeline needs a Hardy martingale");
  InterpolatoryResult res;
  const Martingale ED = dyadic_part(F, &res.dyadic_part_zero);
  res.f_l1 = norm_L1(F);
  res.dyadic_l1 = norm_L1(ED);
  res.residual_l1 = norm_L1(F - ED);
  res.ratio_alpha8 = res.dyadic_part_zero
                         ? 0.0
                         : safe_ratio(res.dyadic_l1, std::pow(res.residual_l1, 0.125) * std::pow(res.f_l1, 0.875));
  res.A0 = safe_ratio(res.f_l1, res.residual_l1);

  const DecompositionReport dec = decompose(F, ED, cfg);
  ConstantsReport& out = res.report;
  out.append(verify_dgi(dec, seed, suite));

  const SteeringWeights W = steering_weights(F, ED);
  const Martingale EG = dyadic_project(dec.G);
  const double t_p = norm_P(transform(dec.G - EG, W));
  out.report_row(suite, "B_A_over_residual", safe_ratio(norm_A(dec.B), res.residual_l1),
                 "||B||_A / ||F-E_D F||_L1", seed);
  out.report_row(suite, "T_G_residual_ratio", safe_ratio(t_p, std::sqrt(res.residual_l1 * res.f_l1)),
                 "||T(G-E_D G)||_P / (||F-E_D F||_L1 ||F||_L1)^(1/2)", seed);
  const double g_p = norm_P(dec.G);
  const double rhs129 = std::pow(t_p, 0.25) * std::pow(g_p, 0.75) + std::sqrt(norm_L1(dec.G - EG) * norm_L1(dec.G));
  out.report_row(suite, "dyadic_G_H1_ratio", safe_ratio(norm_H1(EG), rhs129),
                 "||E_D G||_H1 / (||T(G-E_D G)||_P^(1/4) ||G||_P^(3/4) + ||G-E_D G||_L1^(1/2) ||G||_L1^(1/2))", seed);
  out.report_row(suite, "interpolatory_C_alpha_1_8", res.ratio_alpha8,
                 "||E_D F||_L1 / (||F-E_D F||_L1^(1/8) ||F||_L1^(7/8))", seed);
  out.report_row(suite, "A0", res.A0, "||F||_L1 / ||F-E_D F||_L1", seed);
  return res;
}

// Least-squares slope of log(||E_D F||/||F||) against log(||F-E_D F||/||F||),
// the exponent alpha in r <= C s^alpha that best fits a batch.
inline double fit_interpolation_exponent(const std::vector<InterpolatoryResult>& batch) {
  std::vector<double> xs, ys;
  for (const auto& r : batch) {
    if (r.dyadic_part_zero || r.f_l1 <= 0 || r.residual_l1 <= 0 || r.dyadic_l1 <= 0) continue;
    xs.push_back(std::log(r.residual_l1 / r.f_l1));
    ys.push_back(std::log(r.dyadic_l1 / r.f_l1));
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// L1 distance from a dyadic martingale to Hardy martingales

struct DistanceResult {
  double ratio = 1.0;        // best ||D - F||_L1 / ||D||_L1 found
  std::size_t candidates = 0;
  std::uint64_t best_seed = 0;
};

struct DistanceConfig {
  int degree = 2;        // analytic degree per slice in the search space
  int random_starts = 200;
  int restarts = 4;      // coordinate-descent runs from the best random starts
  int sweeps = 12;
  std::uint64_t seed = 1;
};

namespace detail {

// Hardy martingale parametrised by F_0 and the analytic coefficients
// c[k][slice][n-1], n = 1..degree.  Keeps F_n on the full grid so a single
// coefficient change updates one block.
class HardyParam {
 public:
  HardyParam(TorusGrid grid, int depth, int degree) : grid_(grid), n_(depth), deg_(degree) {
    offsets_.push_back(0);
    for (int k = 1; k <= n_; ++k) offsets_.push_back(offsets_.back() + ipow(grid.size(), k - 1) * deg_);
    c_.assign(offsets_.back(), 0.0);
    basis_.resize(deg_ * grid.size());
    for (int d = 1; d <= deg_; ++d)
      for (int j = 0; j < grid.size(); ++j) basis_[(d - 1) * grid.size() + j] = std::polar(1.0, d * grid.angle(j));
    values_.assign(ipow(grid.size(), n_), 0.0);
  }

  std::size_t size() const { return c_.size() + 1; }  // parameter 0 is F_0

  cplx get(std::size_t p) const { return p == 0 ? start_ : c_[p - 1]; }

  // adds delta to parameter p and updates the stored F_n
  void add(std::size_t p, cplx delta) {
    const std::size_t total = values_.size();
    if (p == 0) {
      start_ += delta;
      for (auto& v : values_) v += delta;
      return;
    }
    c_[p - 1] += delta;
    const auto [k, slice, d] = locate(p - 1);
    const std::size_t m = grid_.size();
    const std::size_t block = total / ipow(m, k - 1);  // points sharing the prefix
    const std::size_t inner = block / m;               // trailing coordinates after k
    const std::size_t base = slice * block;
    for (std::size_t j = 0; j < m; ++j) {
      const cplx add = delta * basis_[(d - 1) * m + j];
      for (std::size_t r = 0; r < inner; ++r) values_[base + j * inner + r] += add;
    }
  }

  // indices touched by parameter p: [first, first + count)
  std::pair<std::size_t, std::size_t> span_of(std::size_t p) const {
    if (p == 0) return {0, values_.size()};
    const auto [k, slice, d] = locate(p - 1);
    const std::size_t block = values_.size() / ipow(grid_.size(), k - 1);
    return {slice * block, block};
  }

  const std::vector<cplx>& values() const { return values_; }

  Martingale to_martingale() const {
    std::vector<ProductFunction> diffs;
    for (int k = 1; k <= n_; ++k) {
      const std::size_t off = offsets_[k - 1];
      diffs.push_back(ProductFunction::from_indices(grid_, k, [&](std::span<const int> idx) {
        std::size_t slice = 0;
        for (int i = 0; i < k - 1; ++i) slice = slice * grid_.size() + idx[i];
        cplx s = 0;
        for (int d = 1; d <= deg_; ++d) s += c_[off + slice * deg_ + (d - 1)] * basis_[(d - 1) * grid_.size() + idx[k - 1]];
        return s;
      }));
    }
    return Martingale(grid_, start_, std::move(diffs));
  }

 private:
  std::tuple<int, std::size_t, int> locate(std::size_t q) const {
    int k = 1;
    while (q >= offsets_[k]) ++k;
    const std::size_t local = q - offsets_[k - 1];
    return {k, local / deg_, static_cast<int>(local % deg_) + 1};
  }

  TorusGrid grid_;
  int n_, deg_;
  std::vector<std::size_t> offsets_;
  std::vector<cplx> c_;
  std::vector<cplx> basis_;
  cplx start_ = 0.0;
  std::vector<cplx> values_;
};

}  // namespace detail

// min over sampled Hardy F of ||D - F||_L1 / ||D||_L1: random Hardy
// candidates, then coordinate descent on the analytic coefficients.
inline DistanceResult distance_experiment(const Martingale& D, const DistanceConfig& cfg) {
  if (!is_dyadic(D)) fail(Errc::NotDyadic, "distance experiment needs a dyadic martingale");
  const double d_l1 = norm_L1(D);
  if (!(d_l1 > 0)) fail(Errc::RangeError, "D must be nonzero");
  const TorusGrid grid = D.grid();
  const int n = D.depth();
  const ProductFunction Dn = D.last();
  DistanceResult res;
  res.ratio = 1.0;  // F = 0
  res.candidates = 1;

  auto dist = [&](const std::vector<cplx>& f) {
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(Dn[i] - f[i]);
    return s / f.size() / d_l1;
  };

  // random starts: scaled copies of random Hardy martingales
  struct Start {
    double ratio;
    std::uint64_t seed;
    std::vector<cplx> params;
  };
  std::vector<Start> starts;
  auto rng = make_stream(cfg.seed, {0xd157});
  std::normal_distribution<double> nd;
  for (int t = 0; t < cfg.random_starts; ++t) {
    detail::HardyParam P(grid, n, cfg.degree);
    const double scale = std::exp(nd(rng)) * d_l1 * 0.5;
    for (std::size_t p = 0; p < P.size(); ++p) P.add(p, scale * cplx(nd(rng), nd(rng)) / std::sqrt(2.0 * P.size()));
    const double r = dist(P.values());
    ++res.candidates;
    std::vector<cplx> params(P.size());
    for (std::size_t p = 0; p < P.size(); ++p) params[p] = P.get(p);
    starts.push_back({r, static_cast<std::uint64_t>(t), std::move(params)});
    if (r < res.ratio) {
      res.ratio = r;
      res.best_seed = t;
    }
  }
  std::sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.ratio < b.ratio; });
  // also descend from F = 0
  {
    detail::HardyParam P(grid, n, cfg.degree);
    std::vector<cplx> zero(P.size(), 0.0);
    starts.insert(starts.begin(), {1.0, 0, std::move(zero)});
  }

  const int runs = std::min<int>(cfg.restarts + 1, static_cast<int>(starts.size()));
  for (int r = 0; r < runs; ++r) {
    detail::HardyParam P(grid, n, cfg.degree);
    for (std::size_t p = 0; p < P.size(); ++p) P.add(p, starts[r].params[p]);
    double cur = dist(P.values());
    double step = 0.25 * d_l1;
    const double norm = static_cast<double>(P.values().size()) * d_l1;
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
      bool improved = false;
      for (std::size_t p = 0; p < P.size(); ++p) {
        const auto [first, count] = P.span_of(p);
        auto block = [&] {
          double s = 0;
          for (std::size_t i = first; i < first + count; ++i) s += std::abs(Dn[i] - P.values()[i]);
          return s;
        };
        for (cplx dir : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
          const double before = block();
          P.add(p, step * dir);
          const double cand = cur + (block() - before) / norm;
          ++res.candidates;
          if (cand < cur - 1e-15) {
            cur = cand;
            improved = true;
            break;
          }
          P.add(p, -step * dir);
        }
      }
      if (!improved) step *= 0.5;
    }
    cur = dist(P.values());  // drop accumulated rounding
    if (cur < res.ratio) {
      res.ratio = cur;
      res.best_seed = starts[r].seed;
    }
  }
  return res;
}

}  // namespace hmlab
