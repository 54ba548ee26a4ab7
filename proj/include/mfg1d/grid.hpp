#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace mfg1d {

// Uniform space-time lattice on [0,L] x [0,T]: x_i = i*dx for i = 0..nx,
// t_k = k*dt for k = 0..nt.  nx/nt count cells and steps, so fields carry
// (nx+1) nodes per slice and (nt+1) slices.
struct Grid {
  int nx = 0;
  int nt = 0;
  double L = 0.0;
  double T = 0.0;

  Grid() = default;  // degenerate; only valid as a "not yet set" placeholder

  Grid(int nx_, int nt_, double L_, double T_) : nx(nx_), nt(nt_), L(L_), T(T_) {
    if (nx < 1 || nt < 1 || !(L > 0.0) || !(T > 0.0))
      fail(ErrorKind::invalid_parameter,
           "Grid: require nx >= 1, nt >= 1, L > 0, T > 0");
  }

  double dx() const { return L / nx; }
  double dt() const { return T / nt; }
  double x(int i) const { return i * dx(); }
  double t(int k) const { return k * dt(); }
  int nodes() const { return nx + 1; }
  int slices() const { return nt + 1; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

// One spatial profile at a fixed time.
struct TimeSlice {
  Grid grid;
  std::vector<double> v;

  TimeSlice() = default;
  explicit TimeSlice(const Grid& g, double fill = 0.0)
      : grid(g), v(static_cast<std::size_t>(g.nodes()), fill) {}
  TimeSlice(const Grid& g, std::vector<double> values)
      : grid(g), v(std::move(values)) {
    if (static_cast<int>(v.size()) != g.nodes())
      fail(ErrorKind::grid_mismatch, "TimeSlice: value count != nx + 1");
  }

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

enum class FieldRole { value_function, density, control, flux };

// Full space-time field, row-major in time: row k holds the slice at t_k.
struct ScalarField {
  Grid grid;
  FieldRole role = FieldRole::value_function;
  std::vector<double> data;

  ScalarField() = default;
  ScalarField(const Grid& g, FieldRole r, double fill = 0.0)
      : grid(g),
        role(r),
        data(static_cast<std::size_t>(g.slices()) * g.nodes(), fill) {}

  double& at(int k, int i) {
    return data[static_cast<std::size_t>(k) * grid.nodes() + i];
  }
  double at(int k, int i) const {
    return data[static_cast<std::size_t>(k) * grid.nodes() + i];
  }
  std::span<double> row(int k) {
    return {data.data() + static_cast<std::size_t>(k) * grid.nodes(),
            static_cast<std::size_t>(grid.nodes())};
  }
  std::span<const double> row(int k) const {
    return {data.data() + static_cast<std::size_t>(k) * grid.nodes(),
            static_cast<std::size_t>(grid.nodes())};
  }
  TimeSlice slice(int k) const {
    auto r = row(k);
    return TimeSlice(grid, std::vector<double>(r.begin(), r.end()));
  }
};

// ---- quadrature and differencing -----------------------------------------

// Composite trapezoid rule: dx * (v_0/2 + v_1 + ... + v_{nx-1} + v_nx/2).
inline double trapezoid(std::span<const double> v, double dx) {
  if (v.size() < 2)
    fail(ErrorKind::grid_too_small, "trapezoid: need at least two nodes");
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return dx * s;
}

inline double trapezoid(const TimeSlice& s) { return trapezoid(s.v, s.grid.dx()); }

// Trapezoid rule applied to the nodewise product a*b, without materializing
// the product.
inline double trapezoid_product(std::span<const double> a,
                                std::span<const double> b, double dx) {
  if (a.size() != b.size())
    fail(ErrorKind::grid_mismatch, "trapezoid_product: length mismatch");
  if (a.size() < 2)
    fail(ErrorKind::grid_too_small, "trapezoid_product: need at least two nodes");
  double s = 0.5 * (a.front() * b.front() + a.back() * b.back());
  for (std::size_t i = 1; i + 1 < a.size(); ++i) s += a[i] * b[i];
  return dx * s;
}

// Second-order spatial derivative: centered differences inside, three-point
// one-sided stencils at the walls.  Exact for quadratics.  Every stencil is
// assembled from node differences so that constant slices produce exact
// floating-point zeros -- the gradient-of-flat-data invariants downstream
// are equality checks, not tolerance checks.
inline void derivative_into(std::span<const double> v, std::span<double> out,
                            double dx) {
  const std::size_t n = v.size();
  if (n < 3)
    fail(ErrorKind::grid_too_small, "derivative: need nx >= 2");
  out[0] = (4.0 * (v[1] - v[0]) - (v[2] - v[0])) / (2.0 * dx);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
  out[n - 1] =
      (4.0 * (v[n - 1] - v[n - 2]) - (v[n - 1] - v[n - 3])) / (2.0 * dx);
}

inline TimeSlice derivative(const TimeSlice& s) {
  TimeSlice d(s.grid);
  derivative_into(s.v, d.v, s.grid.dx());
  return d;
}

// Cumulative distribution of a nonnegative density via running trapezoid
// sums.  Entries below -1e-12 are rejected; smaller rounding dips are
// tolerated and the increments clamped so F stays monotone.
inline TimeSlice cdf(const TimeSlice& density) {
  if (density.grid.nx < 1 || static_cast<int>(density.v.size()) < 2)
    fail(ErrorKind::grid_too_small, "cdf: need at least two nodes");
  for (double m : density.v)
    if (m < -1e-12)
      fail(ErrorKind::negative_density, "cdf: negative density entry");
  const double dx = density.grid.dx();
  TimeSlice F(density.grid);
  F.v[0] = 0.0;
  for (std::size_t i = 1; i < density.v.size(); ++i) {
    const double inc = 0.5 * (density.v[i - 1] + density.v[i]) * dx;
    F.v[i] = F.v[i - 1] + std::max(inc, 0.0);
  }
  return F;
}

// L1 distance between the CDFs; on a line this equals the 1-Wasserstein
// distance of the two (equal-mass) densities.
inline double wasserstein1(const TimeSlice& m1, const TimeSlice& m2) {
  if (!(m1.grid == m2.grid))
    fail(ErrorKind::grid_mismatch, "wasserstein1: grids differ");
  const double mass1 = trapezoid(m1);
  const double mass2 = trapezoid(m2);
  if (std::abs(mass1 - mass2) > 1e-8)
    fail(ErrorKind::mass_mismatch, "wasserstein1: masses differ beyond 1e-8");
  const TimeSlice F1 = cdf(m1);
  const TimeSlice F2 = cdf(m2);
  std::vector<double> diff(F1.v.size());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff[i] = std::abs(F1.v[i] - F2.v[i]);
  return trapezoid(diff, m1.grid.dx());
}

// ---- small helpers used across the solvers -------------------------------

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double sup_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorKind::grid_mismatch, "sup_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace mfg1d
