#pragma once

// Martingales on T^n adapted to the coordinate filtration: the k-th
// difference is a tensor of arity k whose last-coordinate mean vanishes.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "hmlab/error.hpp"
#include "hmlab/product.hpp"
#include "hmlab/rng.hpp"
#include "hmlab/torus.hpp"

namespace hmlab {

class Martingale {
 public:
  // diffs[k-1] has arity k.
  Martingale(TorusGrid grid, cplx start, std::vector<ProductFunction> diffs,
             double tol = tol::kIdentity)
      : grid_(grid), start_(start), diffs_(std::move(diffs)) {
    if (depth() > kDepthCap)
      fail(Errc::DepthCap, "depth " + std::to_string(depth()) + " exceeds cap " + std::to_string(kDepthCap));
    for (int k = 1; k <= depth(); ++k) {
      const auto& d = diffs_[k - 1];
      require_same_grid(grid_, d.grid());
      if (d.arity() != k) fail(Errc::ArityMismatch, "difference " + std::to_string(k) + " has wrong arity");
      const double bound = tol * std::max(1.0, d.sup_norm());
      const ProductFunction mean = cond_expect_prev(d);
      for (cplx c : mean.values())
        if (std::abs(c) > bound)
          fail(Errc::NotMartingale, "difference " + std::to_string(k) + " has nonzero conditional mean");
    }
  }

  static Martingale zero(TorusGrid grid, int depth) {
    std::vector<ProductFunction> d;
    for (int k = 1; k <= depth; ++k) d.push_back(ProductFunction::zeros(grid, k));
    return Martingale(grid, 0.0, std::move(d));
  }

  const TorusGrid& grid() const { return grid_; }
  int depth() const { return static_cast<int>(diffs_.size()); }
  cplx start() const { return start_; }
  const ProductFunction& diff(int k) const { return diffs_.at(k - 1); }
  const std::vector<ProductFunction>& diffs() const { return diffs_; }

  // F_k = F_0 + sum_{j<=k} dF_j as a tensor of arity k.
  ProductFunction partial_sum(int k) const {
    ProductFunction s = ProductFunction::scalar(grid_, start_);
    for (int j = 1; j <= k; ++j) s = s.extend(j) + diffs_[j - 1];
    return s;
  }
  ProductFunction last() const { return partial_sum(depth()); }

  friend Martingale operator+(const Martingale& a, const Martingale& b) { return combine(a, b, 1.0); }
  friend Martingale operator-(const Martingale& a, const Martingale& b) { return combine(a, b, -1.0); }
  friend Martingale operator*(cplx s, const Martingale& a) {
    std::vector<ProductFunction> d;
    for (const auto& x : a.diffs_) d.push_back(s * x);
    return Martingale(a.grid_, s * a.start_, std::move(d));
  }

 private:
  static Martingale combine(const Martingale& a, const Martingale& b, double sign) {
    require_same_grid(a.grid_, b.grid_);
    if (a.depth() != b.depth()) fail(Errc::DepthMismatch, "martingale depths differ");
    std::vector<ProductFunction> d;
    for (int k = 0; k < a.depth(); ++k) d.push_back(a.diffs_[k] + cplx(sign) * b.diffs_[k]);
    return Martingale(a.grid_, a.start_ + sign * b.start_, std::move(d));
  }

  TorusGrid grid_;
  cplx start_;
  std::vector<ProductFunction> diffs_;
};

// ---------------------------------------------------------------------------
// norms

inline double norm_L1(const Martingale& F) { return expectation_abs(F.last()); }

inline double norm_A(const Martingale& F) {
  double s = 0;
  for (const auto& d : F.diffs()) s += expectation_abs(d);
  return s;
}

namespace detail {
// E (sum_k x_k)^{1/2} for nonnegative tensors x_k of arity k broadcast to n.
inline double expect_sqrt_sum(const std::vector<ProductFunction>& terms, int n) {
  if (n == 0) return 0.0;
  std::vector<double> acc(ipow(terms.front().grid().size(), n), 0.0);
  for (const auto& t : terms) {
    const std::size_t rep = acc.size() / t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t[i].real();
      for (std::size_t r = 0; r < rep; ++r) acc[i * rep + r] += v;
    }
  }
  double s = 0;
  for (double a : acc) s += std::sqrt(a);
  return s / static_cast<double>(acc.size());
}
}  // namespace detail

inline double norm_H1(const Martingale& F) {
  std::vector<ProductFunction> t;
  for (const auto& d : F.diffs()) t.push_back(d.map([](cplx z) { return std::norm(z); }));
  return detail::expect_sqrt_sum(t, F.depth());
}

inline double norm_P(const Martingale& F) {
  std::vector<ProductFunction> t;
  for (const auto& d : F.diffs()) t.push_back(cond_expect_prev(d.map([](cplx z) { return std::norm(z); })));
  return detail::expect_sqrt_sum(t, F.depth());
}

// E max_{0<=k<=n} |F_k|
inline double maximal_norm(const Martingale& F) {
  const int n = F.depth();
  if (n == 0) return std::abs(F.start());
  std::vector<double> mx(ipow(F.grid().size(), n), std::abs(F.start()));
  for (int k = 1; k <= n; ++k) {
    ProductFunction Fk = F.partial_sum(k);
    const std::size_t rep = mx.size() / Fk.size();
    for (std::size_t i = 0; i < Fk.size(); ++i) {
      const double a = std::abs(Fk[i]);
      for (std::size_t r = 0; r < rep; ++r) mx[i * rep + r] = std::max(mx[i * rep + r], a);
    }
  }
  double s = 0;
  for (double v : mx) s += v;
  return s / static_cast<double>(mx.size());
}

// ---------------------------------------------------------------------------
// structure

inline bool is_hardy(const Martingale& F, double tol = tol::kStructural) {
  for (const auto& d : F.diffs())
    for (std::size_t s = 0; s < d.slice_count(); ++s)
      if (!is_analytic(d.slice(s), tol)) return false;
  return true;
}

inline Martingale dyadic_project(const Martingale& F) {
  std::vector<ProductFunction> d;
  for (const auto& x : F.diffs()) d.push_back(dyadic_project(x));
  return Martingale(F.grid(), F.start(), std::move(d));
}

inline bool is_dyadic(const Martingale& D, double tol = tol::kStructural) {
  Martingale P = dyadic_project(D);
  for (int k = 1; k <= D.depth(); ++k) {
    const double bound = tol * std::max(1.0, D.diff(k).sup_norm());
    for (std::size_t i = 0; i < D.diff(k).size(); ++i)
      if (std::abs(P.diff(k)[i] - D.diff(k)[i]) > bound) return false;
  }
  return true;
}

struct SteeringWeights {
  // w[k-1] = w_{k-1}, arity k-1, for k = 1..n.
  std::vector<ProductFunction> w;

  int depth() const { return static_cast<int>(w.size()); }
  void validate(double tol = 1e-12) const {
    for (int k = 1; k <= depth(); ++k) {
      if (w[k - 1].arity() != k - 1) fail(Errc::ArityMismatch, "steering weight arity");
      for (cplx z : w[k - 1].values())
        if (std::abs(std::abs(z) - 1.0) > tol) fail(Errc::RangeError, "steering weight is not unimodular");
    }
  }
};

inline constexpr double kSteeringFloor = 1e-12;

// w_{k-1} = conj(F_{k-1} - D_{k-1}) / |F_{k-1} - D_{k-1}|, or the fallback
// where the modulus is below 1e-12.
inline SteeringWeights steering_weights(const Martingale& F, const Martingale& D, cplx fallback = 1.0) {
  require_same_grid(F.grid(), D.grid());
  if (F.depth() != D.depth()) fail(Errc::DepthMismatch, "steering weights need equal depth");
  if (std::abs(std::abs(fallback) - 1.0) > 1e-12) fail(Errc::RangeError, "fallback weight must be unimodular");
  SteeringWeights W;
  for (int k = 1; k <= F.depth(); ++k) {
    ProductFunction diff = F.partial_sum(k - 1) - D.partial_sum(k - 1);
    W.w.push_back(diff.map([fallback](cplx z) {
      const double r = std::abs(z);
      return r < kSteeringFloor ? fallback : std::conj(z) / r;
    }));
  }
  return W;
}

// Grid fraction of each step k = 1..n where |F_{k-1} - D_{k-1}| falls below
// the steering floor, i.e. where the fallback weight is used.
inline std::vector<double> zero_fiber_mass(const Martingale& F, const Martingale& D) {
  require_same_grid(F.grid(), D.grid());
  if (F.depth() != D.depth()) fail(Errc::DepthMismatch, "zero fiber needs equal depth");
  std::vector<double> out;
  for (int k = 1; k <= F.depth(); ++k) {
    const ProductFunction diff = F.partial_sum(k - 1) - D.partial_sum(k - 1);
    std::size_t hits = 0;
    for (cplx z : diff.values()) hits += std::abs(z) < kSteeringFloor;
    out.push_back(static_cast<double>(hits) / diff.size());
  }
  return out;
}

// Real-valued martingale with increments Im(w_{k-1} dG_k); start 0.
inline Martingale transform(const Martingale& G, const SteeringWeights& W) {
  if (W.depth() != G.depth()) fail(Errc::ArityMismatch, "steering weights do not match martingale depth");
  std::vector<ProductFunction> d;
  for (int k = 1; k <= G.depth(); ++k) {
    const auto& w = W.w[k - 1];
    if (w.arity() != k - 1) fail(Errc::ArityMismatch, "steering weight arity");
    ProductFunction we = w.extend(k);
    d.push_back(ProductFunction::zip(we, G.diff(k), [](cplx a, cplx b) { return cplx((a * b).imag(), 0.0); }));
  }
  return Martingale(G.grid(), 0.0, std::move(d));
}

inline Martingale cosine_part(const Martingale& G) {
  std::vector<ProductFunction> d;
  for (int k = 1; k <= G.depth(); ++k) {
    const auto& x = G.diff(k);
    d.push_back(cplx(0.5) * (x + x.reflect_axis(k - 1)));
  }
  return Martingale(G.grid(), G.start(), std::move(d));
}

inline Martingale sine_part(const Martingale& G) {
  Martingale U = cosine_part(G);
  std::vector<ProductFunction> d;
  for (int k = 1; k <= G.depth(); ++k) d.push_back(G.diff(k) - U.diff(k));
  return Martingale(G.grid(), 0.0, std::move(d));
}

using SignPattern = std::vector<int>;

// v_k(x_1^{e_1}, ..., x_k^{e_k}); conjugation x -> x^{-1} is a node reversal.
inline Martingale randomize(const Martingale& V, const SignPattern& eps) {
  if (static_cast<int>(eps.size()) < V.depth()) fail(Errc::DepthMismatch, "sign pattern shorter than depth");
  for (int e : eps)
    if (e != 1 && e != -1) fail(Errc::RangeError, "sign pattern entries must be +1 or -1");
  std::vector<ProductFunction> d;
  for (int k = 1; k <= V.depth(); ++k) {
    ProductFunction x = V.diff(k);
    for (int a = 0; a < k; ++a)
      if (eps[a] == -1) x = x.reflect_axis(a);
    d.push_back(x);
  }
  return Martingale(V.grid(), V.start(), std::move(d));
}

// P(v_k) = 2^{-(k-1)} sum over sign patterns of the first k-1 coordinates.
// The average over {+1,-1}^{k-1} factors into one symmetrization per axis.
inline Martingale projection_P(const Martingale& V) {
  std::vector<ProductFunction> d;
  for (int k = 1; k <= V.depth(); ++k) {
    ProductFunction x = V.diff(k);
    for (int a = 0; a < k - 1; ++a) x = cplx(0.5) * (x + x.reflect_axis(a));
    d.push_back(x);
  }
  return Martingale(V.grid(), V.start(), std::move(d));
}

// Rank-one test: every slice of dD_k must be a multiple of one last-coordinate
// profile r; with sigma = r / max|r| the step is regular when E|sigma|^2 > alpha.
inline bool is_regular(const Martingale& D, double alpha, double tol = tol::kStructural) {
  const int m = D.grid().size();
  for (int k = 1; k <= D.depth(); ++k) {
    const auto& d = D.diff(k);
    std::size_t best = 0;
    double best_norm = 0;
    for (std::size_t s = 0; s < d.slice_count(); ++s) {
      double n2 = 0;
      for (cplx z : d.slice_span(s)) n2 += std::norm(z);
      if (n2 > best_norm) {
        best_norm = n2;
        best = s;
      }
    }
    if (best_norm == 0) continue;
    auto r = d.slice_span(best);
    const double scale = std::max(1.0, d.sup_norm());
    for (std::size_t s = 0; s < d.slice_count(); ++s) {
      auto x = d.slice_span(s);
      cplx num = 0;
      for (int j = 0; j < m; ++j) num += x[j] * std::conj(r[j]);
      const cplx c = num / best_norm;
      for (int j = 0; j < m; ++j)
        if (std::abs(x[j] - c * r[j]) > tol * scale) return false;
    }
    double rmax = 0, r2 = 0;
    for (int j = 0; j < m; ++j) {
      rmax = std::max(rmax, std::abs(r[j]));
      r2 += std::norm(r[j]);
    }
    if ((r2 / m) / (rmax * rmax) <= alpha) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// generators

enum class AmplitudeLaw { Gaussian, Uniform };

inline AmplitudeLaw amplitude_law_from_string(const std::string& s) {
  if (s == "gaussian") return AmplitudeLaw::Gaussian;
  if (s == "uniform") return AmplitudeLaw::Uniform;
  fail(Errc::InvalidConfig, "unknown amplitude law '" + s + "'");
}

struct HardyConfig {
  int m = 32;
  int depth = 2;
  int degree = 2;          // analytic degree in the last coordinate
  int prefix_degree = 1;   // trigonometric degree of coefficients in earlier coordinates
  AmplitudeLaw law = AmplitudeLaw::Gaussian;
  double decay = 1.0;      // harmonic j is scaled by j^{-decay}
  double spike = 0.0;      // weight of a peaked analytic bump added to each step
  bool random_start = true;
  std::uint64_t seed = 1;
};

namespace detail {
inline cplx draw(std::mt19937_64& rng, AmplitudeLaw law) {
  if (law == AmplitudeLaw::Gaussian) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    double a = n(rng), b = n(rng);
    return {a, b};
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = std::sqrt(u(rng)), t = 2 * kPi * u(rng);
  return std::polar(r, t);
}

// Builds sum_{j in freqs} c_j(x) e^{i j y} with c_j a trig polynomial of degree
// L in each prefix coordinate, summed (not multiplied) over coordinates.
inline ProductFunction random_step(TorusGrid grid, int k, const std::vector<int>& freqs, int L,
                                   AmplitudeLaw law, double decay, std::mt19937_64& rng) {
  struct Term {
    int j;
    cplx base;
    std::vector<cplx> pre;  // [(i * (2L+1)) + (l + L)]
  };
  std::vector<Term> terms;
  for (int j : freqs) {
    Term t{j, draw(rng, law) * std::pow(std::abs(j), -decay), {}};
    t.pre.resize(static_cast<std::size_t>((k - 1) * (2 * L + 1)), 0.0);
    for (int i = 0; i < k - 1; ++i)
      for (int l = -L; l <= L; ++l)
        if (l != 0) t.pre[i * (2 * L + 1) + (l + L)] = 0.5 * draw(rng, law) * std::pow(std::abs(j), -decay);
    terms.push_back(std::move(t));
  }
  return ProductFunction::sample(grid, k, [&](std::span<const double> th) {
    cplx s = 0;
    for (const auto& t : terms) {
      cplx c = t.base;
      for (int i = 0; i < k - 1; ++i)
        for (int l = -L; l <= L; ++l)
          if (l != 0) c += t.pre[i * (2 * L + 1) + (l + L)] * std::polar(1.0, l * th[i]);
      s += c * std::polar(1.0, t.j * th[k - 1]);
    }
    return s;
  });
}
}  // namespace detail

inline Martingale random_hardy(const HardyConfig& cfg) {
  TorusGrid grid(cfg.m);
  if (cfg.depth < 1 || cfg.depth > kDepthCap) fail(Errc::DepthCap, "depth outside [1, cap]");
  if (cfg.degree < 1 || 8 * cfg.degree > cfg.m) fail(Errc::DegreeOverflow, "degree must be in [1, m/8]");
  if (cfg.prefix_degree < 0 || 8 * cfg.prefix_degree > cfg.m)
    fail(Errc::DegreeOverflow, "prefix degree must be in [0, m/8]");
  auto rng = make_stream(cfg.seed, {0x4a5d});
  cplx start = cfg.random_start ? detail::draw(rng, cfg.law) : cplx(0.0);
  std::vector<int> freqs;
  for (int j = 1; j <= cfg.degree; ++j) freqs.push_back(j);
  std::vector<ProductFunction> d;
  for (int k = 1; k <= cfg.depth; ++k) {
    ProductFunction step = detail::random_step(grid, k, freqs, cfg.prefix_degree, cfg.law, cfg.decay, rng);
    if (cfg.spike > 0) {
      const double y0 = 2 * kPi * uniform01(rng);
      const cplx c = cfg.spike * detail::draw(rng, cfg.law);
      const int deg = cfg.degree;
      step = step + ProductFunction::sample(grid, k, [&](std::span<const double> th) {
        cplx s = 0;
        for (int j = 1; j <= deg; ++j) s += std::polar(1.0, j * (th[k - 1] - y0));
        return c * s;
      });
    }
    d.push_back(std::move(step));
  }
  return Martingale(grid, start, std::move(d));
}

// Same construction with both signs of frequency in the last coordinate.
inline Martingale random_martingale(const HardyConfig& cfg) {
  TorusGrid grid(cfg.m);
  if (cfg.depth < 1 || cfg.depth > kDepthCap) fail(Errc::DepthCap, "depth outside [1, cap]");
  if (cfg.degree < 1 || 8 * cfg.degree > cfg.m) fail(Errc::DegreeOverflow, "degree must be in [1, m/8]");
  auto rng = make_stream(cfg.seed, {0x9e11});
  cplx start = cfg.random_start ? detail::draw(rng, cfg.law) : cplx(0.0);
  std::vector<int> freqs;
  for (int j = 1; j <= cfg.degree; ++j) {
    freqs.push_back(j);
    freqs.push_back(-j);
  }
  std::vector<ProductFunction> d;
  for (int k = 1; k <= cfg.depth; ++k)
    d.push_back(detail::random_step(grid, k, freqs, cfg.prefix_degree, cfg.law, cfg.decay, rng));
  return Martingale(grid, start, std::move(d));
}

// dD_k = d_{k-1}(sigma_1, ..., sigma_{k-1}) sigma_k with Gaussian values per
// sign pattern.
inline Martingale random_dyadic(int m, int depth, std::uint64_t seed, double scale = 1.0) {
  TorusGrid grid(m);
  if (depth < 1 || depth > kDepthCap) fail(Errc::DepthCap, "depth outside [1, cap]");
  auto rng = make_stream(seed, {0xd7ad});
  cplx start = scale * detail::draw(rng, AmplitudeLaw::Gaussian);
  std::vector<ProductFunction> d;
  for (int k = 1; k <= depth; ++k) {
    std::vector<cplx> table(std::size_t{1} << (k - 1));
    for (auto& t : table) t = scale * detail::draw(rng, AmplitudeLaw::Gaussian);
    d.push_back(ProductFunction::from_indices(grid, k, [&](std::span<const int> idx) {
      std::size_t pat = 0;
      for (int i = 0; i < k - 1; ++i)
        if (grid.sign_cos(idx[i]) < 0) pat |= std::size_t{1} << i;
      return table[pat] * grid.sign_cos(idx[k - 1]);
    }));
  }
  return Martingale(grid, start, std::move(d));
}

// ---------------------------------------------------------------------------
// empirical black-box inequalities

// E(sum (E_{k-1}|v_k|)^2)^{1/2} / E(sum |v_k|^2)^{1/2}
inline double lepingle_ratio(const Martingale& V) {
  std::vector<ProductFunction> t;
  for (const auto& d : V.diffs()) {
    ProductFunction c = cond_expect_prev(d.map([](cplx z) { return std::abs(z); }));
    t.push_back(c.map([](cplx z) { return std::norm(z); }));
  }
  const double num = detail::expect_sqrt_sum(t, V.depth());
  const double den = norm_H1(V);
  return den > 0 ? num / den : 0.0;
}

// d[k-1] holds d_{k-1} on {+1,-1}^{k-1}; bit i of the index set means
// eps_{i+1} = -1.
struct DyadicFamily {
  std::vector<std::vector<cplx>> d;
  int depth() const { return static_cast<int>(d.size()); }
};

inline DyadicFamily random_dyadic_family(int depth, std::uint64_t seed) {
  auto rng = make_stream(seed, {0x6a11});
  DyadicFamily f;
  for (int k = 1; k <= depth; ++k) {
    std::vector<cplx> v(std::size_t{1} << (k - 1));
    for (auto& x : v) x = detail::draw(rng, AmplitudeLaw::Gaussian);
    f.d.push_back(std::move(v));
  }
  return f;
}

// sum_k |E d_{k-1}|^2 / (E|sum d_{k-1} eps_k| * E(sum |d_{k-1}|^2)^{1/2})
inline double garnett_jones_ratio(const DyadicFamily& f) {
  const int n = f.depth();
  if (n == 0) return 0.0;
  double lhs = 0;
  for (const auto& v : f.d) {
    cplx mean = 0;
    for (cplx x : v) mean += x;
    lhs += std::norm(mean / static_cast<double>(v.size()));
  }
  const std::size_t patterns = std::size_t{1} << n;
  double e_abs = 0, e_sq = 0;
  for (std::size_t p = 0; p < patterns; ++p) {
    cplx sum = 0;
    double sq = 0;
    for (int k = 1; k <= n; ++k) {
      const std::size_t prefix = p & ((std::size_t{1} << (k - 1)) - 1);
      const cplx dk = f.d[k - 1][prefix];
      const double eps = (p >> (k - 1)) & 1 ? -1.0 : 1.0;
      sum += dk * eps;
      sq += std::norm(dk);
    }
    e_abs += std::abs(sum);
    e_sq += std::sqrt(sq);
  }
  e_abs /= patterns;
  e_sq /= patterns;
  return (e_abs * e_sq) > 0 ? lhs / (e_abs * e_sq) : 0.0;
}

// ---------------------------------------------------------------------------
// serialization: JSON manifest plus one little-endian float64 file per step

namespace detail {
inline void write_le_doubles(std::ostream& os, std::span<const cplx> v) {
  for (cplx z : v) {
    double parts[2] = {z.real(), z.imag()};
    for (double x : parts) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, 8);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      char buf[8];
      std::memcpy(buf, &bits, 8);
      os.write(buf, 8);
    }
  }
}

inline std::vector<cplx> read_le_doubles(std::istream& is, std::size_t count) {
  std::vector<cplx> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    double parts[2];
    for (double& x : parts) {
      char buf[8];
      if (!is.read(buf, 8)) fail(Errc::IOError, "truncated tensor file");
      std::uint64_t bits;
      std::memcpy(&bits, buf, 8);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      std::memcpy(&x, &bits, 8);
    }
    v[i] = {parts[0], parts[1]};
  }
  return v;
}
}  // namespace detail

// Writes <dir>/<stem>.json and <dir>/<stem>_diff<k>.bin; returns the manifest path.
inline std::filesystem::path write_martingale(const Martingale& F, const std::filesystem::path& dir,
                                              const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  nlohmann::json files = nlohmann::json::array();
  for (int k = 1; k <= F.depth(); ++k) {
    std::string name = stem + "_diff" + std::to_string(k) + ".bin";
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) fail(Errc::IOError, "cannot write " + (dir / name).string());
    detail::write_le_doubles(os, F.diff(k).values());
    if (!os) fail(Errc::IOError, "write failed for " + (dir / name).string());
    files.push_back(name);
  }
  nlohmann::json manifest = {{"depth", F.depth()},
                             {"m", F.grid().size()},
                             {"F0", {F.start().real(), F.start().imag()}},
                             {"diffs", files}};
  auto path = dir / (stem + ".json");
  std::ofstream os(path);
  if (!os) fail(Errc::IOError, "cannot write " + path.string());
  os << manifest.dump(2) << "\n";
  return path;
}

inline Martingale read_martingale(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) fail(Errc::IOError, "cannot open " + manifest_path.string());
  nlohmann::json j;
  try {
    is >> j;
    TorusGrid grid(j.at("m").get<int>());
    const int depth = j.at("depth").get<int>();
    cplx start(j.at("F0").at(0).get<double>(), j.at("F0").at(1).get<double>());
    const auto& files = j.at("diffs");
    if (static_cast<int>(files.size()) != depth) fail(Errc::IOError, "manifest lists wrong number of diffs");
    std::vector<ProductFunction> d;
    for (int k = 1; k <= depth; ++k) {
      auto p = manifest_path.parent_path() / files.at(k - 1).get<std::string>();
      std::ifstream bs(p, std::ios::binary);
      if (!bs) fail(Errc::IOError, "cannot open " + p.string());
      d.emplace_back(grid, k, detail::read_le_doubles(bs, ipow(grid.size(), k)));
    }
    return Martingale(grid, start, std::move(d));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::IOError, std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace hmlab
