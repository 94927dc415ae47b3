#pragma once

// Lacunary Fejer-product construction: the frequency ladder (n_k, a_k), the
// kernel K = prod F_{a_k}(z^{n_k}), the sigma-algebra generated by
// sigma(z^{n_k}), the operators E_Sigma, R, T and J = T(K * .), and the
// desk-scale checks of the embedding constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "hmlab/error.hpp"
#include "hmlab/martingale.hpp"
#include "hmlab/report.hpp"
#include "hmlab/rng.hpp"
#include "hmlab/torus.hpp"

namespace hmlab {

inline constexpr int kMaxLevels = 3;

// sign(cos(n theta_j)) from integer arithmetic.  For n < m/2 the argument
// never lands on a zero of cos.
inline TorusFunction sigma_dilated(TorusGrid grid, long n) {
  const long m = grid.size();
  std::vector<cplx> v(m);
  for (long j = 0; j < m; ++j) {
    const long q = (n * (2 * j + 1)) % (2 * m);
    v[j] = (2 * q < m || 2 * q > 3 * m) ? 1.0 : -1.0;
  }
  return TorusFunction(grid, std::move(v));
}

struct FrequencyLadder {
  TorusGrid grid{16};
  double eps = 0.2;
  std::vector<long> n;
  std::vector<int> a;
  std::vector<double> eps_targets;
  std::vector<double> achieved;  // ||s_k - sigma||_1 on the grid
  std::vector<TorusFunction> s;  // s_k = F_{a_k} * sigma

  int levels() const { return static_cast<int>(n.size()); }

  // max |j| over E_m for the first m levels (closed box |k_i| <= a_i)
  long max_in_E(int m) const {
    long t = 0;
    for (int i = 0; i < m; ++i) t += a[i] * n[i];
    return t;
  }
  long max_frequency() const { return max_in_E(levels()); }

  std::vector<int> box_dims() const {
    std::vector<int> d;
    for (int x : a) d.push_back(2 * x + 1);
    return d;
  }
  std::size_t box_size() const {
    std::size_t s = 1;
    for (int x : a) s *= static_cast<std::size_t>(2 * x + 1);
    return s;
  }
  // tuple (k_1..k_M) for a box index; level 1 varies slowest
  std::vector<int> tuple_of(std::size_t idx) const {
    std::vector<int> k(levels());
    for (int i = levels() - 1; i >= 0; --i) {
      const std::size_t d = 2 * a[i] + 1;
      k[i] = static_cast<int>(idx % d) - a[i];
      idx /= d;
    }
    return k;
  }
  std::size_t index_of(const std::vector<int>& k) const {
    std::size_t idx = 0;
    for (int i = 0; i < levels(); ++i) idx = idx * (2 * a[i] + 1) + static_cast<std::size_t>(k[i] + a[i]);
    return idx;
  }
  long frequency(const std::vector<int>& k) const {
    long f = 0;
    for (int i = 0; i < levels(); ++i) f += k[i] * n[i];
    return f;
  }
  // Representation of f in the box, peeled from the top level down.
  std::optional<std::vector<int>> decode(long f) const {
    std::vector<int> k(levels(), 0);
    for (int i = levels() - 1; i >= 0; --i) {
      const long q = static_cast<long>(std::llround(static_cast<double>(f) / static_cast<double>(n[i])));
      if (i == 0) {
        if (f != q * n[0]) return std::nullopt;
      }
      if (std::abs(q) > a[i]) return std::nullopt;
      k[i] = static_cast<int>(q);
      f -= q * n[i];
    }
    if (f != 0) return std::nullopt;
    return k;
  }
};

namespace detail {
inline double fejer_sigma_error(const TorusFunction& sigma, int a, TorusFunction* out) {
  TorusFunction s = convolve(fejer_kernel(sigma.grid(), a), sigma).real();
  const double e = norm_l1(s - sigma);
  if (out) *out = s;
  return e;
}

inline long next_pow2_above(long x) {
  long m = 16;
  while (m <= x) m *= 2;
  return m;
}
}  // namespace detail

// Explicit ladder with the given (n, a).  Checks lacunarity but not the L1
// targets, so it also serves as a negative control.
inline FrequencyLadder make_ladder(TorusGrid grid, double eps, std::vector<long> n, std::vector<int> a) {
  if (n.empty() || n.size() != a.size()) fail(Errc::InvalidConfig, "ladder needs matching n and a");
  if (static_cast<int>(n.size()) > kMaxLevels) fail(Errc::InvalidConfig, "at most 3 levels");
  FrequencyLadder L;
  L.grid = grid;
  L.eps = eps;
  L.n = std::move(n);
  L.a = std::move(a);
  for (int k = 0; k < L.levels(); ++k) {
    if (L.a[k] < 1 || L.n[k] < 1) fail(Errc::InvalidConfig, "ladder entries must be positive");
    if (k > 0 && L.n[k] < (1L << (2 * k)) * L.max_in_E(k))
      fail(Errc::InvalidConfig, "ladder is not lacunary at level " + std::to_string(k + 1));
  }
  if (2 * L.max_frequency() >= grid.size())
    throw ResolutionExceeded("ladder needs frequencies up to " + std::to_string(L.max_frequency()),
                             detail::next_pow2_above(2 * L.max_frequency()));
  const TorusFunction sigma = sign_re(grid);
  for (int k = 0; k < L.levels(); ++k) {
    TorusFunction s = sigma;
    L.achieved.push_back(detail::fejer_sigma_error(sigma, L.a[k], &s));
    L.s.push_back(s);
    L.eps_targets.push_back(k == 0 ? eps / 2 : eps / static_cast<double>(1L << k));
  }
  return L;
}

// Greedy ladder: n_1 = 1, a_k smallest (>= a_{k-1}) with ||s_k - sigma||_1
// within target, n_{k+1} smallest with 4^k max|E_k| <= n_{k+1}.
inline FrequencyLadder build_ladder(int levels, double eps, TorusGrid grid) {
  if (levels < 1 || levels > kMaxLevels) fail(Errc::InvalidConfig, "levels must be in [1, 3]");
  if (!(eps > 0 && eps < 1)) fail(Errc::InvalidConfig, "eps must lie in (0, 1)");
  const TorusFunction sigma = sign_re(grid);
  std::vector<long> n;
  std::vector<int> a;
  for (int k = 0; k < levels; ++k) {
    const double target = k == 0 ? eps / 2 : eps / static_cast<double>(1L << k);
    int ak = k == 0 ? 1 : a.back();
    while (detail::fejer_sigma_error(sigma, ak, nullptr) > target) {
      ++ak;
      if (2 * ak >= grid.size())
        throw ResolutionExceeded("Fejer order for level " + std::to_string(k + 1) + " exceeds the grid",
                                 detail::next_pow2_above(4L * ak));
    }
    long nk = 1;
    if (k > 0) {
      long maxE = 0;
      for (int i = 0; i < k; ++i) maxE += a[i] * n[i];
      nk = std::max(n.back() + 1, (1L << (2 * k)) * maxE);
    }
    n.push_back(nk);
    a.push_back(ak);
    long top = 0;
    for (int i = 0; i <= k; ++i) top += a[i] * n[i];
    if (2 * top >= grid.size())
      throw ResolutionExceeded("level " + std::to_string(k + 1) + " needs frequencies up to " + std::to_string(top) +
                                   ", grid holds " + std::to_string(grid.size() / 2 - 1),
                               detail::next_pow2_above(2 * top));
  }
  return make_ladder(grid, eps, std::move(n), std::move(a));
}

inline nlohmann::json to_json(const FrequencyLadder& L) {
  return {{"levels", L.levels()}, {"m", L.grid.size()},       {"eps", L.eps},
          {"n", L.n},             {"a", L.a},                 {"eps_targets", L.eps_targets},
          {"achieved_errors", L.achieved}, {"max_frequency", L.max_frequency()}};
}

inline FrequencyLadder ladder_from_json(const nlohmann::json& j) {
  try {
    return make_ladder(TorusGrid(j.at("m").get<int>()), j.at("eps").get<double>(), j.at("n").get<std::vector<long>>(),
                       j.at("a").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed ladder: ") + e.what());
  }
}

// Every j in E_m satisfies 4^m |j| <= n_{m+1}; returns the smallest
// n_{m+1} - 4^m |j| over the enumeration.
inline long lacunarity_margin(const FrequencyLadder& L) {
  long worst = std::numeric_limits<long>::max();
  for (int m = 1; m < L.levels(); ++m) {
    FrequencyLadder sub;
    sub.n.assign(L.n.begin(), L.n.begin() + m);
    sub.a.assign(L.a.begin(), L.a.begin() + m);
    for (std::size_t i = 0; i < sub.box_size(); ++i)
      worst = std::min(worst, L.n[m] - (1L << (2 * m)) * std::abs(sub.frequency(sub.tuple_of(i))));
  }
  return worst;
}

// Number of box tuples sharing a frequency with an earlier tuple.
inline std::size_t representation_collisions(const FrequencyLadder& L) {
  std::vector<long> f(L.box_size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = L.frequency(L.tuple_of(i));
  std::sort(f.begin(), f.end());
  std::size_t dup = 0;
  for (std::size_t i = 1; i < f.size(); ++i) dup += f[i] == f[i - 1];
  return dup;
}

inline TorusFunction kernel_K(const FrequencyLadder& L) {
  TorusFunction K = TorusFunction::constant(L.grid, 1.0);
  for (int k = 0; k < L.levels(); ++k) K = K * dilate(fejer_kernel(L.grid, L.a[k]), static_cast<int>(L.n[k]));
  return K.real();
}

// s_k(z^{n_k}) on the working grid
inline TorusFunction smoothed_sign_dilated(const FrequencyLadder& L, int k) {
  return dilate(L.s[k], static_cast<int>(L.n[k])).real();
}

// Sign pattern of (sigma(z^{n_1}), ..., sigma(z^{n_M})) at each node, bit k
// set when the k-th sign is negative.
inline std::vector<unsigned> sign_patterns(const FrequencyLadder& L) {
  std::vector<unsigned> p(L.grid.size(), 0);
  for (int k = 0; k < L.levels(); ++k) {
    const TorusFunction sk = sigma_dilated(L.grid, L.n[k]);
    for (int j = 0; j < L.grid.size(); ++j)
      if (sk[j].real() < 0) p[j] |= 1u << k;
  }
  return p;
}

// E_Sigma: average over the atoms of the sign pattern.  This is the
// orthogonal projection onto span{prod_{k in S} sigma(z^{n_k})}.
inline TorusFunction sigma_project(const TorusFunction& g, const FrequencyLadder& L) {
  require_same_grid(g.grid(), L.grid);
  const auto pat = sign_patterns(L);
  const std::size_t cells = std::size_t{1} << L.levels();
  std::vector<cplx> sum(cells, 0.0);
  std::vector<int> cnt(cells, 0);
  for (int j = 0; j < g.size(); ++j) {
    sum[pat[j]] += g[j];
    ++cnt[pat[j]];
  }
  std::vector<cplx> v(g.size());
  for (int j = 0; j < g.size(); ++j) v[j] = sum[pat[j]] / static_cast<double>(cnt[pat[j]]);
  return TorusFunction(g.grid(), std::move(v));
}

// R g = K * (E_Sigma g)
inline TorusFunction operator_R(const TorusFunction& g, const FrequencyLadder& L) {
  return convolve(kernel_K(L), sigma_project(g, L));
}

// R g through the kernel A(z, zeta) = prod (1 + s_k(z^{n_k}) sigma(zeta^{n_k})).
// A depends on zeta only through its sign pattern, so the zeta quadrature is
// grouped by cell.
inline TorusFunction operator_R_kernel(const TorusFunction& g, const FrequencyLadder& L) {
  require_same_grid(g.grid(), L.grid);
  const auto pat = sign_patterns(L);
  const std::size_t cells = std::size_t{1} << L.levels();
  std::vector<cplx> mass(cells, 0.0);
  for (int j = 0; j < g.size(); ++j) mass[pat[j]] += g[j];
  for (auto& c : mass) c /= static_cast<double>(g.size());
  std::vector<TorusFunction> sd;
  for (int k = 0; k < L.levels(); ++k) sd.push_back(smoothed_sign_dilated(L, k));
  std::vector<cplx> v(g.size(), 0.0);
  for (int z = 0; z < g.size(); ++z)
    for (std::size_t c = 0; c < cells; ++c) {
      double A = 1;
      for (int k = 0; k < L.levels(); ++k) A *= 1.0 + sd[k][z].real() * ((c >> k) & 1u ? -1.0 : 1.0);
      v[z] += A * mass[c];
    }
  return TorusFunction(g.grid(), std::move(v));
}

// ---------------------------------------------------------------------------
// L1_E and the transfer operator

class LacunaryFunction {
 public:
  LacunaryFunction(const FrequencyLadder& L, std::vector<cplx> coeffs) : grid_(L.grid), n_(L.n), a_(L.a), c_(std::move(coeffs)) {
    if (c_.size() != L.box_size()) fail(Errc::RangeError, "coefficient box has the wrong size");
  }

  // Reads the coefficients on E_M; anything off E_M above tol * scale fails.
  static LacunaryFunction from_torus(const TorusFunction& f, const FrequencyLadder& L, double tol = 1e-9) {
    require_same_grid(f.grid(), L.grid);
    if (2 * L.max_frequency() >= f.size()) fail(Errc::UnsupportedFrequency, "ladder exceeds the grid");
    const auto all = f.coefficients();
    const int N = f.size() / 2;
    double scale = 0;
    for (cplx c : all) scale = std::max(scale, std::abs(c));
    scale = std::max(scale, 1e-300);
    std::vector<cplx> box(L.box_size());
    std::vector<char> used(all.size(), 0);
    for (std::size_t i = 0; i < box.size(); ++i) {
      const long fr = L.frequency(L.tuple_of(i));
      box[i] = all[fr + N];
      used[fr + N] = 1;
    }
    for (int t = -N; t <= N; ++t)
      if (!used[t + N] && std::abs(all[t + N]) > tol * scale)
        fail(Errc::UnsupportedFrequency, "coefficient at frequency " + std::to_string(t) + " lies outside E");
    return LacunaryFunction(L, std::move(box));
  }

  int levels() const { return static_cast<int>(n_.size()); }
  const std::vector<int>& orders() const { return a_; }
  const std::vector<cplx>& coefficients() const { return c_; }
  const TorusGrid& grid() const { return grid_; }

  TorusFunction to_torus() const {
    const int N = grid_.size() / 2;
    std::vector<cplx> all(2 * N + 1, 0.0);
    std::vector<int> k(levels());
    for (std::size_t i = 0; i < c_.size(); ++i) {
      std::size_t r = i;
      long fr = 0;
      for (int l = levels() - 1; l >= 0; --l) {
        const std::size_t d = 2 * a_[l] + 1;
        fr += (static_cast<long>(r % d) - a_[l]) * n_[l];
        r /= d;
      }
      all[fr + N] += c_[i];
    }
    return TorusFunction::from_coefficients(grid_, all);
  }

 private:
  TorusGrid grid_;
  std::vector<long> n_;
  std::vector<int> a_;
  std::vector<cplx> c_;
};

// Grid for T(f): a power of two with room for 4(a_max + 1) frequencies.
inline int martingale_grid_size(const FrequencyLadder& L) {
  const int amax = *std::max_element(L.a.begin(), L.a.end());
  int m = 8;
  while (m < 4 * (amax + 1)) m *= 2;
  return m;
}

namespace detail {
// Replaces axis `axis` (coefficient index c = k + a) by grid samples of
// e^{i k theta}.
inline std::vector<cplx> synthesize_axis(const std::vector<cplx>& x, std::vector<int>& dims, int axis, int a,
                                         const TorusGrid& grid) {
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= dims[i];
  for (int i = axis + 1; i < static_cast<int>(dims.size()); ++i) inner *= dims[i];
  const int d = dims[axis], m = grid.size();
  std::vector<cplx> E(static_cast<std::size_t>(m) * d);
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < d; ++c) E[j * d + c] = std::polar(1.0, (c - a) * grid.angle(j));
  std::vector<cplx> y(outer * m * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (int c = 0; c < d; ++c) {
      const cplx* src = &x[(o * d + c) * inner];
      for (int j = 0; j < m; ++j) {
        const cplx e = E[j * d + c];
        cplx* dst = &y[(o * m + j) * inner];
        for (std::size_t r = 0; r < inner; ++r) dst[r] += e * src[r];
      }
    }
  dims[axis] = m;
  return y;
}
}  // namespace detail

// z^{sum k_j n_j} -> prod w_j^{k_j}, grouped into differences d_k that carry
// the tuples whose last nonzero entry sits at level k.
inline Martingale transfer_T(const LacunaryFunction& f, int grid_size = 0) {
  const int M = f.levels();
  if (M > kDepthCap) fail(Errc::DepthCap, "ladder deeper than the martingale depth cap");
  const auto& a = f.orders();
  if (grid_size == 0) {
    const int amax = *std::max_element(a.begin(), a.end());
    grid_size = 8;
    while (grid_size < 4 * (amax + 1)) grid_size *= 2;
  }
  TorusGrid g(grid_size);
  for (int x : a)
    if (2 * x >= grid_size) fail(Errc::DegreeOverflow, "martingale grid too small for the ladder");
  const auto& c = f.coefficients();
  // strides of the full box
  std::vector<std::size_t> stride(M, 1);
  for (int i = M - 2; i >= 0; --i) stride[i] = stride[i + 1] * (2 * a[i + 1] + 1);
  std::size_t zero_idx = 0;
  for (int i = 0; i < M; ++i) zero_idx += a[i] * stride[i];

  std::vector<ProductFunction> diffs;
  for (int k = 1; k <= M; ++k) {
    std::vector<int> dims(a.begin(), a.begin() + k);
    for (auto& d : dims) d = 2 * d + 1;
    std::size_t sub = 1;
    for (int d : dims) sub *= d;
    std::vector<cplx> x(sub, 0.0);
    for (std::size_t i = 0; i < sub; ++i) {
      std::size_t r = i, full = 0;
      bool last_zero = false;
      for (int l = k - 1; l >= 0; --l) {
        const std::size_t cl = r % dims[l];
        r /= dims[l];
        if (l == k - 1) last_zero = static_cast<int>(cl) == a[l];
        full += cl * stride[l];
      }
      for (int l = k; l < M; ++l) full += a[l] * stride[l];  // k_l = 0 above level k
      if (!last_zero) x[i] = c[full];
    }
    for (int axis = 0; axis < k; ++axis) x = detail::synthesize_axis(x, dims, axis, a[axis], g);
    diffs.push_back(ProductFunction(g, k, std::move(x)));
  }
  return Martingale(g, c[zero_idx], std::move(diffs));
}

// J g = T(K * g)
inline Martingale operator_J(const TorusFunction& g, const FrequencyLadder& L) {
  const TorusFunction Kg = convolve(kernel_K(L), g);
  return transfer_T(LacunaryFunction::from_torus(Kg, L), martingale_grid_size(L));
}

// ---------------------------------------------------------------------------
// checks

inline std::vector<cplx> random_walsh_coefficients(std::mt19937_64& rng, int levels) {
  std::normal_distribution<double> nd;
  std::vector<cplx> c(std::size_t{1} << levels);
  for (auto& x : c) x = {nd(rng), nd(rng)};
  return c;
}

// h = sum_S c_S prod_{k in S} sigma(z^{n_k})
inline TorusFunction walsh_combination(const FrequencyLadder& L, const std::vector<cplx>& c) {
  const auto pat = sign_patterns(L);
  std::vector<cplx> v(L.grid.size(), 0.0);
  for (int j = 0; j < L.grid.size(); ++j)
    for (std::size_t S = 0; S < c.size(); ++S) {
      const int parity = __builtin_popcount(static_cast<unsigned>(S) & pat[j]) & 1;
      v[j] += parity ? -c[S] : c[S];
    }
  return TorusFunction(L.grid, std::move(v));
}

inline ConstantsReport verify_ladder(const FrequencyLadder& L, std::uint64_t seed = 0,
                                     const std::string& suite = "embedding") {
  ConstantsReport out;
  const long lac = lacunarity_margin(L);
  out.assert_row(suite, "lacunarity_exhaustive", L.levels() > 1 ? static_cast<double>(lac) : 0.0,
                 "min n_{m+1} - 4^m |j| over E_m >= 0", L.levels() > 1 ? static_cast<double>(lac) : 0.0, 0.0, seed,
                 "n=" + nlohmann::json(L.n).dump() + " a=" + nlohmann::json(L.a).dump());
  const auto dup = static_cast<double>(representation_collisions(L));
  out.assert_row(suite, "representation_injective", dup, "duplicate frequencies in the box == 0", -dup, 0.0, seed,
                 "box=" + std::to_string(L.box_size()));
  double worst = 0;
  for (int k = 0; k < L.levels(); ++k) worst = std::max(worst, L.achieved[k] - L.eps_targets[k]);
  out.assert_row(suite, "smoothed_sign_targets", worst, "||s_k - sigma||_1 <= target_k", -worst, 0.0, seed);

  const TorusFunction K = kernel_K(L);
  const double mass = std::abs(K.coeff(0) - 1.0);
  out.assert_row(suite, "K_unit_mass", mass, "|K^(0) - 1| <= 1e-10", -mass, 1e-10, seed);
  double kmin = std::numeric_limits<double>::infinity();
  for (cplx v : K.values()) kmin = std::min(kmin, v.real());
  out.assert_row(suite, "K_nonnegative", kmin, "min K >= -1e-10", kmin, 1e-10, seed);
  double off = 0;
  const int N = L.grid.size() / 2;
  for (int t = -N + 1; t < N; ++t)
    if (!L.decode(t)) off = std::max(off, std::abs(K.coeff(t)));
  out.assert_row(suite, "K_spectrum_in_E", off, "max |K^(j)|, j outside E, <= 1e-10", -off, 1e-10, seed);
  out.report_row(suite, "max_frequency", static_cast<double>(L.max_frequency()), "<= m/2 - 1", seed);
  return out;
}

// E_Sigma projection properties and the two routes for R on random g.
inline ConstantsReport verify_operators(const FrequencyLadder& L, std::uint64_t seed = 0, int trials = 10,
                                        const std::string& suite = "embedding") {
  ConstantsReport out;
  auto rng = make_stream(seed, {0xe5});
  std::normal_distribution<double> nd;
  double idem = 0, unital = 0, pos = std::numeric_limits<double>::infinity();
  double route_sup = 0, route_l1 = 0;
  for (int t = 0; t < trials; ++t) {
    const TorusFunction g = TorusFunction::sample(L.grid, [&](double) { return cplx(nd(rng), nd(rng)); });
    const TorusFunction Pg = sigma_project(g, L);
    idem = std::max(idem, (sigma_project(Pg, L) - Pg).sup_norm());
    const TorusFunction p = g.abs();
    for (cplx v : sigma_project(p, L).values()) pos = std::min(pos, v.real());
    const TorusFunction r1 = operator_R(g, L), r2 = operator_R_kernel(g, L);
    route_sup = std::max(route_sup, (r1 - r2).sup_norm() / std::max(1.0, r2.sup_norm()));
    route_l1 = std::max(route_l1, norm_l1(r1 - r2) / std::max(1e-300, norm_l1(r2)));
  }
  unital = (sigma_project(TorusFunction::constant(L.grid, 1.0), L) - TorusFunction::constant(L.grid, 1.0)).sup_norm();
  out.assert_row(suite, "E_Sigma_idempotent", idem, "sup|E E g - E g| <= 1e-10", -idem, 1e-10, seed);
  out.assert_row(suite, "E_Sigma_unital", unital, "sup|E 1 - 1| <= 1e-10", -unital, 1e-10, seed);
  out.assert_row(suite, "E_Sigma_positive", pos, "min E|g| >= -1e-10", pos, 1e-10, seed);
  const double one = (operator_R(TorusFunction::constant(L.grid, 1.0), L) - TorusFunction::constant(L.grid, 1.0)).sup_norm();
  out.assert_row(suite, "R_fixes_constants", one, "sup|R1 - 1| <= 1e-10", -one, 1e-10, seed);
  out.assert_row(suite, "R_two_routes_agree", route_sup, "sup|K*(E g) - int A g| / max(1, sup) <= 1e-8",
                 -route_sup, 1e-8, seed, "l1_rel=" + fmt_num(route_l1));
  return out;
}

// sup over zeta of int |A(., zeta) - B(., zeta)| and the analogue with the
// product kernel G on T^M; both depend on zeta only through its sign pattern.
inline ConstantsReport verify_small(const FrequencyLadder& L, std::uint64_t seed = 0, int trials = 20,
                                    const std::string& suite = "embedding") {
  ConstantsReport out;
  const int M = L.levels();
  const auto pat = sign_patterns(L);
  std::vector<char> seen(std::size_t{1} << M, 0);
  for (unsigned p : pat) seen[p] = 1;
  std::vector<TorusFunction> sd, sg;
  for (int k = 0; k < M; ++k) {
    sd.push_back(smoothed_sign_dilated(L, k));
    sg.push_back(sigma_dilated(L.grid, L.n[k]));
  }
  double small1 = 0;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) continue;
    double s = 0;
    for (int z = 0; z < L.grid.size(); ++z) {
      double A = 1, B = 1;
      for (int k = 0; k < M; ++k) {
        const double tau = (c >> k) & 1u ? -1.0 : 1.0;
        A *= 1.0 + sd[k][z].real() * tau;
        B *= 1.0 + sg[k][z].real() * tau;
      }
      s += std::abs(A - B);
    }
    small1 = std::max(small1, s / L.grid.size());
  }
  out.assert_row(suite, "small1_sup_A_minus_B", small1, "<= eps + 1e-6", L.eps + 1e-6 - small1, 0.0, seed,
                 "eps=" + fmt_num(L.eps));

  // A(w, zeta) = prod (1 + s_k(w_k) tau_k), G = prod (1 + gamma_k sigma(w_k) tau_k) on T^M
  const TorusGrid mg(martingale_grid_size(L));
  std::vector<std::vector<double>> s_on(M), sig_on(M);
  std::vector<double> gamma(M);
  const TorusFunction sigma = sign_re(L.grid);
  for (int k = 0; k < M; ++k) {
    gamma[k] = integrate(L.s[k] * sigma).real();
    for (int j = 0; j < mg.size(); ++j) {
      double v = 0;
      for (int t = -L.a[k]; t <= L.a[k]; ++t) v += (L.s[k].coeff(t) * std::polar(1.0, t * mg.angle(j))).real();
      s_on[k].push_back(v);
      sig_on[k].push_back(mg.sign_cos(j));
    }
  }
  const std::size_t pts = ipow(mg.size(), M);
  double small2 = 0;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) continue;
    double s = 0;
    for (std::size_t i = 0; i < pts; ++i) {
      std::size_t r = i;
      double A = 1, G = 1;
      for (int k = M - 1; k >= 0; --k) {
        const int j = static_cast<int>(r % mg.size());
        r /= mg.size();
        const double tau = (c >> k) & 1u ? -1.0 : 1.0;
        A *= 1.0 + s_on[k][j] * tau;
        G *= 1.0 + gamma[k] * sig_on[k][j] * tau;
      }
      s += std::abs(A - G);
    }
    small2 = std::max(small2, s / pts);
  }
  out.report_row(suite, "small2_sup_A_minus_G", small2, "sup_zeta E_w|A - G|, compare eps", seed,
                 "gamma=" + nlohmann::json(gamma).dump());

  // dyadic projection against J on L1(Sigma)
  auto rng = make_stream(seed, {0x5a11});
  double pert = 0, jnorm_lo = std::numeric_limits<double>::infinity(), jnorm_hi = 0;
  for (int t = 0; t < trials; ++t) {
    const TorusFunction h = walsh_combination(L, random_walsh_coefficients(rng, M));
    const Martingale Jh = operator_J(h, L);
    const Martingale ED = dyadic_project(Jh);
    pert = std::max(pert, safe_ratio(norm_L1(ED - Jh), norm_L1(ED)));
    const double r = norm_L1(Jh) / norm_l1(h);
    jnorm_lo = std::min(jnorm_lo, r);
    jnorm_hi = std::max(jnorm_hi, r);
  }
  out.report_row(suite, "dyadic_perturbation_of_J", pert, "max ||E_D Jh - Jh||_L1 / ||E_D Jh||_L1", seed);
  out.report_row(suite, "J_lower_on_L1_Sigma", jnorm_lo, "min ||Jh|| / ||h||, compare 1/4", seed);
  out.report_row(suite, "J_upper_on_L1_Sigma", jnorm_hi, "max ||Jh|| / ||h||, compare 4", seed);
  return out;
}

// ||T f||_L1 / ||f||_L1 over random f in L1_E.
struct MeyerBand {
  double lower = std::numeric_limits<double>::infinity();
  double upper = 0;
  std::uint64_t lower_seed = 0;
};

inline MeyerBand meyer_band(const FrequencyLadder& L, std::uint64_t seed, int trials) {
  MeyerBand b;
  const int mg = martingale_grid_size(L);
  for (int t = 0; t < trials; ++t) {
    auto rng = make_stream(seed, {0x3e7e, static_cast<std::uint64_t>(t)});
    std::normal_distribution<double> nd;
    std::vector<cplx> c(L.box_size());
    for (auto& x : c) x = {nd(rng), nd(rng)};
    const LacunaryFunction f(L, std::move(c));
    const double r = norm_L1(transfer_T(f, mg)) / norm_l1(f.to_torus());
    if (r < b.lower) {
      b.lower = r;
      b.lower_seed = static_cast<std::uint64_t>(t);
    }
    b.upper = std::max(b.upper, r);
  }
  return b;
}

struct EmbeddingConfig {
  int pairs = 200;
  int degree = 8;   // analytic polynomials f of degree <= 8
  int sweeps = 25;
  int meyer_trials = 100;
  double A0 = 0;    // measured constant from the distance experiments, 0 if unknown
  std::uint64_t seed = 1;
};

struct EmbeddingDistance {
  std::vector<double> ratios;  // min_f ||f - h|| / ||h|| per sampled h
  double min = 1, median = 1, max = 1;
};

// min over analytic f of degree <= deg of ||f - h||_1 / ||h||_1, starting
// from f = 0 and from the truncated Riesz projection of h, coordinate
// descent with step halving.
inline double analytic_distance(const TorusFunction& h, int degree, int sweeps) {
  const int m = h.size();
  const double hn = norm_l1(h);
  if (!(hn > 0)) fail(Errc::RangeError, "h must be nonzero");
  const TorusGrid& g = h.grid();
  std::vector<std::vector<cplx>> basis(degree + 1, std::vector<cplx>(m));
  for (int d = 0; d <= degree; ++d)
    for (int j = 0; j < m; ++j) basis[d][j] = std::polar(1.0, d * g.angle(j));
  double best = 1.0;
  for (int start = 0; start < 2; ++start) {
    std::vector<cplx> r(h.values().begin(), h.values().end());  // r = h - f
    if (start == 1)
      for (int d = 0; d <= degree; ++d) {
        const cplx c = h.coeff(d);
        for (int j = 0; j < m; ++j) r[j] -= c * basis[d][j];
      }
    auto l1 = [&] {
      double s = 0;
      for (cplx x : r) s += std::abs(x);
      return s / m;
    };
    double cur = l1();
    double step = 0.25 * hn;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      bool improved = false;
      for (int d = 0; d <= degree; ++d)
        for (cplx dir : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
          const cplx delta = step * dir;
          for (int j = 0; j < m; ++j) r[j] -= delta * basis[d][j];
          const double cand = l1();
          if (cand < cur - 1e-15) {
            cur = cand;
            improved = true;
            break;
          }
          for (int j = 0; j < m; ++j) r[j] += delta * basis[d][j];
        }
      if (!improved) step *= 0.5;
    }
    best = std::min(best, cur / hn);
  }
  return best;
}

inline ConstantsReport verify_embedding(const FrequencyLadder& L, const EmbeddingConfig& cfg,
                                        EmbeddingDistance* dist_out = nullptr, const std::string& suite = "embedding") {
  ConstantsReport out;
  const MeyerBand mb = meyer_band(L, cfg.seed, cfg.meyer_trials);
  out.assert_row(suite, "meyer_lower_constant", mb.lower, "min ||Tf||/||f|| > 0.05 (alarm)", mb.lower - 0.05, 0.0,
                 cfg.seed, "trial=" + std::to_string(mb.lower_seed));
  out.report_row(suite, "meyer_upper_constant", mb.upper, "max ||Tf||/||f||", cfg.seed);

  EmbeddingDistance d;
  auto rng = make_stream(cfg.seed, {0xd15});
  for (int t = 0; t < cfg.pairs; ++t) {
    const TorusFunction h = walsh_combination(L, random_walsh_coefficients(rng, L.levels()));
    d.ratios.push_back(analytic_distance(h, cfg.degree, cfg.sweeps));
  }
  if (!d.ratios.empty()) {
    std::vector<double> s = d.ratios;
    std::sort(s.begin(), s.end());
    d.min = s.front();
    d.max = s.back();
    d.median = s.size() % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
  }
  out.report_row(suite, "distance_min", d.min, "min_h min_f ||f - h||_1 / ||h||_1", cfg.seed,
                 "pairs=" + std::to_string(cfg.pairs));
  out.report_row(suite, "distance_median", d.median, "", cfg.seed);
  out.report_row(suite, "distance_max", d.max, "", cfg.seed);
  out.report_row(suite, "A_empirical", safe_ratio(1.0, d.min), "max ||h|| / ||f - h||", cfg.seed);
  if (cfg.A0 > 0) out.report_row(suite, "A0_input", cfg.A0, "from the distance experiments", cfg.seed);
  if (dist_out) *dist_out = std::move(d);
  return out;
}

}  // namespace hmlab
