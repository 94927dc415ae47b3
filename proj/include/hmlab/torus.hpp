#pragma once

// Functions on a single copy of the torus, sampled on the offset grid
// theta_j = pi (2j+1) / m.  Coefficients are recomputed from samples on
// demand and cached once per function.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hmlab/error.hpp"
#include "hmlab/fft.hpp"

namespace hmlab {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;

namespace tol {
inline constexpr double kStructural = 1e-9;  // mean-zero and analyticity checks
inline constexpr double kIdentity = 1e-10;
}  // namespace tol

class TorusGrid {
 public:
  explicit TorusGrid(int m) : m_(m) {
    if (m < 4 || !std::has_single_bit(static_cast<unsigned>(m)))
      fail(Errc::InvalidGrid, "grid size must be a power of two >= 4, got " + std::to_string(m));
  }

  int size() const { return m_; }
  int nyquist() const { return m_ / 2; }
  double angle(int j) const { return kPi * (2.0 * j + 1.0) / m_; }
  // theta -> -theta permutes the nodes: node j goes to m-1-j.
  int reflect(int j) const { return m_ - 1 - j; }
  // sign(cos theta_j), decided on the index so it is exact.
  double sign_cos(int j) const { return (4 * j + 2 < m_ || 4 * j + 2 > 3 * m_) ? 1.0 : -1.0; }

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  int m_;
};

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b) {
  if (!(a == b))
    fail(Errc::GridMismatch,
         "grid sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

class TorusFunction {
 public:
  TorusFunction(TorusGrid grid, std::vector<cplx> values)
      : grid_(grid),
        values_(std::make_shared<const std::vector<cplx>>(std::move(values))),
        cache_(std::make_shared<Cache>()) {
    if (static_cast<int>(values_->size()) != grid_.size())
      fail(Errc::GridMismatch, "value count does not match grid size");
  }

  template <class Fn>
  static TorusFunction sample(TorusGrid grid, Fn&& fn) {
    std::vector<cplx> v(grid.size());
    for (int j = 0; j < grid.size(); ++j) v[j] = cplx(fn(grid.angle(j)));
    return TorusFunction(grid, std::move(v));
  }

  static TorusFunction constant(TorusGrid grid, cplx c) {
    return TorusFunction(grid, std::vector<cplx>(grid.size(), c));
  }

  static TorusFunction monomial(TorusGrid grid, int n, cplx c = 1.0) {
    return sample(grid, [&](double t) { return c * std::polar(1.0, n * t); });
  }

  // coeffs[n + m/2] holds c(n) for n = -m/2 .. m/2.  A Nyquist pair is
  // folded onto the grid as (c(N) - c(-N)) sin(N theta).
  static TorusFunction from_coefficients(TorusGrid grid, std::span<const cplx> coeffs) {
    const int m = grid.size(), N = m / 2;
    if (static_cast<int>(coeffs.size()) != m + 1)
      fail(Errc::GridMismatch, "coefficient array must have m+1 entries");
    std::vector<cplx> x(m);
    for (int n = -N + 1; n < N; ++n) x[(n + m) % m] = std::polar(1.0, kPi * n / m) * coeffs[n + N];
    x[N] = cplx(0, 1) * (coeffs[2 * N] - coeffs[0]);
    detail::fft_inplace(x, false);
    return TorusFunction(grid, std::move(x));
  }

  const TorusGrid& grid() const { return grid_; }
  int size() const { return grid_.size(); }
  std::span<const cplx> values() const { return *values_; }
  cplx operator[](int j) const { return (*values_)[j]; }

  // Fourier coefficient c(n), |n| <= m/2.  The grid cannot separate +N from
  // -N; the Nyquist content is reported at +N so that Parseval is exact.
  cplx coeff(int n) const {
    const int m = size(), N = m / 2;
    if (n < -N || n > N) return 0.0;
    if (n == -N) return 0.0;
    return std::polar(1.0, -kPi * n / m) * dft()[(n + m) % m];
  }

  // c(n) for n = -m/2 .. m/2, indexed by n + m/2.
  std::vector<cplx> coefficients() const {
    const int N = size() / 2;
    std::vector<cplx> c(2 * N + 1);
    for (int n = -N; n <= N; ++n) c[n + N] = coeff(n);
    return c;
  }

  // Amplitude of the sin(N theta) component.
  cplx nyquist_amplitude() const { return dft()[size() / 2]; }

  // Normalized DFT X[k]/m of the samples (no offset twiddle).
  std::span<const cplx> dft() const {
    std::call_once(cache_->once, [this] {
      cache_->dft = detail::fft(*values_, true);
      const double inv = 1.0 / size();
      for (auto& c : cache_->dft) c *= inv;
    });
    return cache_->dft;
  }

  // Diagonal Fourier multiplier; the Nyquist bin gets (mu(N) + mu(-N)) / 2.
  template <class Mu>
  TorusFunction apply_multiplier(Mu&& mu) const {
    const int m = size(), N = m / 2;
    std::vector<cplx> x(dft().begin(), dft().end());
    for (int k = 0; k < m; ++k) {
      if (k == N) {
        x[k] *= 0.5 * (cplx(mu(N)) + cplx(mu(-N)));
      } else {
        x[k] *= cplx(mu(k < N ? k : k - m));
      }
    }
    detail::fft_inplace(x, false);
    return TorusFunction(grid_, std::move(x));
  }

  template <class Fn>
  TorusFunction map(Fn&& fn) const {
    std::vector<cplx> v(size());
    for (int j = 0; j < size(); ++j) v[j] = cplx(fn((*values_)[j]));
    return TorusFunction(grid_, std::move(v));
  }

  TorusFunction conj() const {
    return map([](cplx z) { return std::conj(z); });
  }
  TorusFunction real() const {
    return map([](cplx z) { return z.real(); });
  }
  TorusFunction imag() const {
    return map([](cplx z) { return z.imag(); });
  }
  TorusFunction abs() const {
    return map([](cplx z) { return std::abs(z); });
  }
  // f(-theta)
  TorusFunction reflected() const {
    std::vector<cplx> v(size());
    for (int j = 0; j < size(); ++j) v[j] = (*values_)[grid_.reflect(j)];
    return TorusFunction(grid_, std::move(v));
  }

  double sup_norm() const {
    double s = 0;
    for (cplx z : *values_) s = std::max(s, std::abs(z));
    return s;
  }

  friend TorusFunction operator+(const TorusFunction& a, const TorusFunction& b) {
    return zip(a, b, [](cplx x, cplx y) { return x + y; });
  }
  friend TorusFunction operator-(const TorusFunction& a, const TorusFunction& b) {
    return zip(a, b, [](cplx x, cplx y) { return x - y; });
  }
  friend TorusFunction operator*(const TorusFunction& a, const TorusFunction& b) {
    return zip(a, b, [](cplx x, cplx y) { return x * y; });
  }
  friend TorusFunction operator*(cplx s, const TorusFunction& a) {
    return a.map([s](cplx x) { return s * x; });
  }
  friend TorusFunction operator+(const TorusFunction& a, cplx s) {
    return a.map([s](cplx x) { return x + s; });
  }

 private:
  struct Cache {
    std::once_flag once;
    std::vector<cplx> dft;
  };

  template <class Op>
  static TorusFunction zip(const TorusFunction& a, const TorusFunction& b, Op op) {
    require_same_grid(a.grid_, b.grid_);
    std::vector<cplx> v(a.size());
    for (int j = 0; j < a.size(); ++j) v[j] = op(a[j], b[j]);
    return TorusFunction(a.grid_, std::move(v));
  }

  TorusGrid grid_;
  std::shared_ptr<const std::vector<cplx>> values_;
  std::shared_ptr<Cache> cache_;
};

// ---------------------------------------------------------------------------
// quadrature and norms

inline cplx integrate(const TorusFunction& f) {
  cplx s = 0;
  for (cplx z : f.values()) s += z;
  return s / static_cast<double>(f.size());
}

inline double norm_l1(const TorusFunction& f) {
  double s = 0;
  for (cplx z : f.values()) s += std::abs(z);
  return s / f.size();
}

inline double norm_l2(const TorusFunction& f) {
  double s = 0;
  for (cplx z : f.values()) s += std::norm(z);
  return std::sqrt(s / f.size());
}

// <f, g> = integral of f * conj(g)
inline cplx inner(const TorusFunction& f, const TorusFunction& g) {
  require_same_grid(f.grid(), g.grid());
  cplx s = 0;
  for (int j = 0; j < f.size(); ++j) s += f[j] * std::conj(g[j]);
  return s / static_cast<double>(f.size());
}

// Scale used by the structural tolerances: max(1, sup|f|).
inline double tol_scale(const TorusFunction& f) { return std::max(1.0, f.sup_norm()); }

// ---------------------------------------------------------------------------
// spectral operators

inline TorusFunction hilbert(const TorusFunction& f) {
  return f.apply_multiplier([](int n) { return cplx(0, n > 0 ? -1.0 : (n < 0 ? 1.0 : 0.0)); });
}

inline bool is_analytic(const TorusFunction& h, double tol = tol::kStructural) {
  const int N = h.size() / 2;
  const double bound = tol * tol_scale(h);
  for (int n = -N + 1; n <= 0; ++n)
    if (std::abs(h.coeff(n)) > bound) return false;
  return std::abs(h.nyquist_amplitude()) <= bound;
}

inline void require_analytic(const TorusFunction& h, double tol = tol::kStructural) {
  if (!is_analytic(h, tol)) fail(Errc::NotAnalytic, "non-positive frequency content exceeds tolerance");
}

// h = u + i H u.  Keeps 0 < n < m/2 with doubled weight; the Nyquist term is
// discarded because sin(N theta) has no analytic counterpart on the grid.
inline TorusFunction analytic_complete(const TorusFunction& u, double tol = tol::kStructural) {
  if (std::abs(u.coeff(0)) > tol * tol_scale(u))
    fail(Errc::NonZeroMean, "analytic_complete needs a mean-zero input");
  const int N = u.size() / 2;
  return u.apply_multiplier([N](int n) { return (n > 0 && n < N) ? 2.0 : 0.0; });
}

// (u, v) with u(theta) = (h(theta) + h(-theta)) / 2 and v = h - u.
inline std::pair<TorusFunction, TorusFunction> even_odd_split(const TorusFunction& h) {
  TorusFunction u = 0.5 * (h + h.reflected());
  return {u, h - u};
}

inline TorusFunction sign_re(TorusGrid grid) {
  std::vector<cplx> v(grid.size());
  for (int j = 0; j < grid.size(); ++j) v[j] = grid.sign_cos(j);
  return TorusFunction(grid, std::move(v));
}

inline TorusFunction fejer_kernel(TorusGrid grid, int a) {
  if (a < 0) fail(Errc::DegreeOverflow, "Fejer order must be nonnegative");
  if (2 * a >= grid.size())
    fail(Errc::DegreeOverflow, "Fejer order " + std::to_string(a) + " needs m > " + std::to_string(2 * a));
  const int N = grid.size() / 2;
  std::vector<cplx> c(2 * N + 1, 0.0);
  for (int j = -a; j <= a; ++j) c[j + N] = 1.0 - std::abs(j) / (a + 1.0);
  return TorusFunction::from_coefficients(grid, c);
}

// Spectral product c_f(n) c_g(n) for |n| < m/2; the Nyquist bin is dropped.
inline TorusFunction convolve(const TorusFunction& f, const TorusFunction& g) {
  require_same_grid(f.grid(), g.grid());
  const int N = f.size() / 2;
  std::vector<cplx> c(2 * N + 1, 0.0);
  for (int n = -N + 1; n < N; ++n) c[n + N] = f.coeff(n) * g.coeff(n);
  return TorusFunction::from_coefficients(f.grid(), c);
}

// f(z^n): coefficient c(j) moves to j*n.  Requires n * deg f < m/2.
inline TorusFunction dilate(const TorusFunction& f, int n) {
  if (n < 1) fail(Errc::RangeError, "dilation factor must be positive");
  const int N = f.size() / 2;
  std::vector<cplx> c(2 * N + 1, 0.0);
  const double bound = tol::kIdentity * tol_scale(f);
  for (int j = -N + 1; j < N; ++j) {
    cplx cj = f.coeff(j);
    if (std::abs(cj) <= bound && j != 0) continue;
    long t = static_cast<long>(j) * n;
    if (t <= -N || t >= N) fail(Errc::DegreeOverflow, "dilated spectrum exceeds the grid");
    c[t + N] = cj;
  }
  return TorusFunction::from_coefficients(f.grid(), c);
}

// Analytic mean-zero polynomial sum_{j>=1} c_j w^j, evaluated by Horner.
class AnalyticPolynomial {
 public:
  AnalyticPolynomial() = default;
  explicit AnalyticPolynomial(const TorusFunction& h, double tol = tol::kStructural) {
    require_analytic(h, tol);
    const int N = h.size() / 2;
    const double cut = 1e-15 * tol_scale(h);
    int deg = 0;
    std::vector<cplx> c(N, 0.0);
    for (int n = 1; n < N; ++n) {
      c[n] = h.coeff(n);
      if (std::abs(c[n]) > cut) deg = n;
    }
    c.resize(deg + 1);
    c_ = std::move(c);
    re_.resize(c_.size());
    im_.resize(c_.size());
    for (size_t i = 0; i < c_.size(); ++i) {
      re_[i] = c_[i].real();
      im_[i] = c_[i].imag();
    }
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return degree() <= 0; }
  std::span<const cplx> coefficients() const { return c_; }

  cplx operator()(cplx w) const {
    double sr = 0, si = 0;
    eval(w.real(), w.imag(), sr, si);
    return {sr, si};
  }

  // Real-arithmetic Horner; hot path of the Brownian simulation.
  void eval(double wr, double wi, double& out_r, double& out_i) const {
    double sr = 0, si = 0;
    for (int n = degree(); n >= 1; --n) {
      double tr = sr * wr - si * wi + re_[n];
      double ti = sr * wi + si * wr + im_[n];
      sr = tr;
      si = ti;
    }
    out_r = sr * wr - si * wi;
    out_i = sr * wi + si * wr;
  }

 private:
  std::vector<cplx> c_{0.0};
  std::vector<double> re_{0.0}, im_{0.0};
};

inline cplx disk_eval(const TorusFunction& h, cplx w, double tol = tol::kStructural) {
  if (std::abs(w) > 1.0 + 1e-12) fail(Errc::RangeError, "disk point outside the closed unit disk");
  return AnalyticPolynomial(h, tol)(w);
}

// q = (1 - p) exp(i H log(1 - p)).  Writing the modulus as 1 - p rather than
// exp(log(1 - p)) keeps p + |q| = 1 at rounding level.
inline TorusFunction outer_function(const TorusFunction& p, double tol = tol::kStructural) {
  std::vector<cplx> L(p.size());
  std::vector<double> mod(p.size());
  for (int j = 0; j < p.size(); ++j) {
    cplx v = p[j];
    if (std::abs(v.imag()) > tol) fail(Errc::RangeError, "p must be real");
    if (v.real() < -tol || v.real() > 0.5 + tol)
      fail(Errc::RangeError, "p must lie in [0, 1/2], got " + std::to_string(v.real()));
    double pj = std::clamp(v.real(), 0.0, 0.5);
    mod[j] = 1.0 - pj;
    L[j] = std::log1p(-pj);
  }
  TorusFunction HL = hilbert(TorusFunction(p.grid(), std::move(L)));
  std::vector<cplx> q(p.size());
  for (int j = 0; j < p.size(); ++j) q[j] = mod[j] * std::polar(1.0, HL[j].real());
  return TorusFunction(p.grid(), std::move(q));
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::json to_json(const TorusFunction& f) {
  nlohmann::json vals = nlohmann::json::array();
  for (cplx z : f.values()) vals.push_back({z.real(), z.imag()});
  return {{"m", f.size()}, {"values", std::move(vals)}};
}

inline TorusFunction torus_from_json(const nlohmann::json& j) {
  try {
    TorusGrid grid(j.at("m").get<int>());
    const auto& vals = j.at("values");
    std::vector<cplx> v;
    v.reserve(vals.size());
    for (const auto& e : vals) v.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    return TorusFunction(grid, std::move(v));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::IOError, std::string("malformed TorusFunction JSON: ") + e.what());
  }
}

}  // namespace hmlab
