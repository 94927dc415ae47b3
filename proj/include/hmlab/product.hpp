#pragma once

// Complex tensors on T^k sampled on the product of offset grids.  Storage is
// row-major with the last coordinate fastest, so a fixed prefix selects a
// contiguous slice of length m.

#include <algorithm>
#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hmlab/error.hpp"
#include "hmlab/torus.hpp"

namespace hmlab {

inline constexpr int kDepthCap = 4;

inline std::size_t ipow(std::size_t base, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

class ProductFunction {
 public:
  ProductFunction(TorusGrid grid, int arity, std::vector<cplx> values)
      : grid_(grid), arity_(arity), values_(std::make_shared<const std::vector<cplx>>(std::move(values))) {
    if (arity < 0 || arity > kDepthCap)
      fail(Errc::DepthCap, "arity " + std::to_string(arity) + " outside [0, " + std::to_string(kDepthCap) + "]");
    if (values_->size() != ipow(grid.size(), arity))
      fail(Errc::GridMismatch, "tensor size does not match m^arity");
  }

  static ProductFunction zeros(TorusGrid grid, int arity) { return constant(grid, arity, 0.0); }
  static ProductFunction constant(TorusGrid grid, int arity, cplx c) {
    return ProductFunction(grid, arity, std::vector<cplx>(ipow(grid.size(), arity), c));
  }
  static ProductFunction scalar(TorusGrid grid, cplx c) { return constant(grid, 0, c); }

  // fn(idx) with idx[i] the node index of coordinate i.
  template <class Fn>
  static ProductFunction from_indices(TorusGrid grid, int arity, Fn&& fn) {
    const std::size_t n = ipow(grid.size(), arity);
    std::vector<cplx> v(n);
    std::array<int, kDepthCap> idx{};
    for (std::size_t f = 0; f < n; ++f) {
      std::size_t r = f;
      for (int i = arity - 1; i >= 0; --i) {
        idx[i] = static_cast<int>(r % grid.size());
        r /= grid.size();
      }
      v[f] = cplx(fn(std::span<const int>(idx.data(), arity)));
    }
    return ProductFunction(grid, arity, std::move(v));
  }

  // fn(thetas) with thetas[i] the angle of coordinate i.
  template <class Fn>
  static ProductFunction sample(TorusGrid grid, int arity, Fn&& fn) {
    std::array<double, kDepthCap> th{};
    return from_indices(grid, arity, [&](std::span<const int> idx) {
      for (std::size_t i = 0; i < idx.size(); ++i) th[i] = grid.angle(idx[i]);
      return fn(std::span<const double>(th.data(), idx.size()));
    });
  }

  // A function of the last coordinate only, repeated over every prefix.
  static ProductFunction from_last(const TorusFunction& f, int arity) {
    if (arity < 1) fail(Errc::ArityZero, "from_last needs arity >= 1");
    const std::size_t m = f.size(), slices = ipow(m, arity - 1);
    std::vector<cplx> v(slices * m);
    for (std::size_t s = 0; s < slices; ++s)
      for (std::size_t j = 0; j < m; ++j) v[s * m + j] = f[static_cast<int>(j)];
    return ProductFunction(f.grid(), arity, std::move(v));
  }

  const TorusGrid& grid() const { return grid_; }
  int arity() const { return arity_; }
  std::size_t size() const { return values_->size(); }
  std::size_t slice_count() const { return arity_ == 0 ? 1 : size() / grid_.size(); }
  std::span<const cplx> values() const { return *values_; }
  cplx operator[](std::size_t i) const { return (*values_)[i]; }
  cplx scalar_value() const {
    if (arity_ != 0) fail(Errc::ArityMismatch, "scalar_value on a non-scalar tensor");
    return (*values_)[0];
  }

  std::span<const cplx> slice_span(std::size_t prefix) const {
    if (arity_ == 0) fail(Errc::ArityZero, "slice of a scalar");
    return std::span<const cplx>(*values_).subspan(prefix * grid_.size(), grid_.size());
  }
  TorusFunction slice(std::size_t prefix) const {
    auto s = slice_span(prefix);
    return TorusFunction(grid_, std::vector<cplx>(s.begin(), s.end()));
  }

  // Broadcast to a larger arity; new coordinates are appended at the end.
  ProductFunction extend(int arity) const {
    if (arity < arity_) fail(Errc::ArityMismatch, "extend cannot lower the arity");
    if (arity == arity_) return *this;
    const std::size_t rep = ipow(grid_.size(), arity - arity_);
    std::vector<cplx> v(size() * rep);
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t r = 0; r < rep; ++r) v[i * rep + r] = (*values_)[i];
    return ProductFunction(grid_, arity, std::move(v));
  }

  template <class Fn>
  ProductFunction map(Fn&& fn) const {
    std::vector<cplx> v(size());
    for (std::size_t i = 0; i < size(); ++i) v[i] = cplx(fn((*values_)[i]));
    return ProductFunction(grid_, arity_, std::move(v));
  }

  // Applies fn(line) to every line along `axis`; line has length m.
  template <class Fn>
  ProductFunction along_axis(int axis, Fn&& fn) const {
    if (axis < 0 || axis >= arity_) fail(Errc::ArityMismatch, "axis out of range");
    const std::size_t m = grid_.size();
    const std::size_t inner = ipow(m, arity_ - 1 - axis);
    const std::size_t outer = ipow(m, axis);
    std::vector<cplx> v(values_->begin(), values_->end());
    std::vector<cplx> line(m);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * m * inner + in;
        for (std::size_t j = 0; j < m; ++j) line[j] = v[base + j * inner];
        fn(std::span<cplx>(line));
        for (std::size_t j = 0; j < m; ++j) v[base + j * inner] = line[j];
      }
    }
    return ProductFunction(grid_, arity_, std::move(v));
  }

  // theta_axis -> -theta_axis
  ProductFunction reflect_axis(int axis) const {
    return along_axis(axis, [](std::span<cplx> line) { std::reverse(line.begin(), line.end()); });
  }

  double sup_norm() const {
    double s = 0;
    for (cplx z : *values_) s = std::max(s, std::abs(z));
    return s;
  }

  friend ProductFunction operator+(const ProductFunction& a, const ProductFunction& b) {
    return zip(a, b, [](cplx x, cplx y) { return x + y; });
  }
  friend ProductFunction operator-(const ProductFunction& a, const ProductFunction& b) {
    return zip(a, b, [](cplx x, cplx y) { return x - y; });
  }
  friend ProductFunction operator*(const ProductFunction& a, const ProductFunction& b) {
    return zip(a, b, [](cplx x, cplx y) { return x * y; });
  }
  friend ProductFunction operator*(cplx s, const ProductFunction& a) {
    return a.map([s](cplx x) { return s * x; });
  }

  template <class Op>
  static ProductFunction zip(const ProductFunction& a, const ProductFunction& b, Op op) {
    require_same_grid(a.grid_, b.grid_);
    if (a.arity_ != b.arity_)
      fail(Errc::ArityMismatch,
           "arity " + std::to_string(a.arity_) + " vs " + std::to_string(b.arity_));
    std::vector<cplx> v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = op(a[i], b[i]);
    return ProductFunction(a.grid_, a.arity_, std::move(v));
  }

 private:
  TorusGrid grid_;
  int arity_;
  std::shared_ptr<const std::vector<cplx>> values_;
};

// E_{k-1}: average out the last coordinate.
inline ProductFunction cond_expect_prev(const ProductFunction& f) {
  if (f.arity() == 0) fail(Errc::ArityZero, "cond_expect_prev on a scalar");
  const std::size_t m = f.grid().size(), slices = f.slice_count();
  std::vector<cplx> v(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    cplx acc = 0;
    for (std::size_t j = 0; j < m; ++j) acc += f[s * m + j];
    v[s] = acc / static_cast<double>(m);
  }
  return ProductFunction(f.grid(), f.arity() - 1, std::move(v));
}

// Full expectation.
inline cplx expectation(const ProductFunction& f) {
  cplx acc = 0;
  for (cplx z : f.values()) acc += z;
  return acc / static_cast<double>(f.size());
}

inline double expectation_abs(const ProductFunction& f) {
  double acc = 0;
  for (cplx z : f.values()) acc += std::abs(z);
  return acc / static_cast<double>(f.size());
}

// Rank-2 projection f -> int f + sigma int f sigma along one axis.
inline ProductFunction dyadic_project_axis(const ProductFunction& f, int axis) {
  const TorusGrid g = f.grid();
  return f.along_axis(axis, [&g](std::span<cplx> line) {
    const int m = g.size();
    cplx mean = 0, corr = 0;
    for (int j = 0; j < m; ++j) {
      mean += line[j];
      corr += line[j] * g.sign_cos(j);
    }
    mean /= static_cast<double>(m);
    corr /= static_cast<double>(m);
    for (int j = 0; j < m; ++j) line[j] = mean + g.sign_cos(j) * corr;
  });
}

inline ProductFunction dyadic_project(const ProductFunction& f) {
  ProductFunction out = f;
  for (int a = 0; a < f.arity(); ++a) out = dyadic_project_axis(out, a);
  return out;
}

}  // namespace hmlab
