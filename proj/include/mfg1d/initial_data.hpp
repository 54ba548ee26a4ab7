#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace mfg1d {

// Named data families for initial densities and terminal payoffs.  All of
// them are flat at the walls (value and slope zero where required), so the
// reflecting boundary conditions hold for the continuum data exactly, not
// just after discretization.

// Rescale a nonnegative profile to unit trapezoid mass.
inline TimeSlice normalize_density(TimeSlice m) {
  for (double v : m.v)
    if (v < 0.0)
      fail(ErrorKind::negative_initial_data,
           "normalize_density: negative entry");
  const double mass = trapezoid(m);
  if (!(mass > 0.0))
    fail(ErrorKind::invalid_data, "normalize_density: zero mass profile");
  for (double& v : m.v) v /= mass;
  return m;
}

// Compactly supported mollifier bump centered at `center` with half-width
// `width`, normalized to unit mass.  Vanishes with all derivatives at the
// support edge.
inline TimeSlice bump_density(const Grid& grid, double center, double width) {
  if (!(width > 0.0))
    fail(ErrorKind::invalid_parameter, "bump_density: width must be positive");
  TimeSlice m(grid);
  for (int i = 0; i <= grid.nx; ++i) {
    const double z = (grid.x(i) - center) / width;
    m.v[i] = std::abs(z) < 1.0 ? std::exp(-1.0 / (1.0 - z * z)) : 0.0;
  }
  return normalize_density(std::move(m));
}

// Plateau of height ~1/(L - 2*margin) on [margin, L - margin] with smooth
// cosine shoulders of width margin/2 on each side, normalized to unit mass.
// The shoulders keep the profile C^1 and zero at the walls.
inline TimeSlice uniform_interior_density(const Grid& grid, double margin) {
  if (!(margin > 0.0) || !(2.0 * margin < grid.L))
    fail(ErrorKind::invalid_parameter,
         "uniform_interior_density: need 0 < margin < L/2");
  const double rise = 0.5 * margin;
  auto shoulder = [](double s) {
    return 0.5 * (1.0 - std::cos(std::numbers::pi * s));
  };
  TimeSlice m(grid);
  for (int i = 0; i <= grid.nx; ++i) {
    const double x = grid.x(i);
    const double from_left = x - (margin - rise);
    const double from_right = (grid.L - margin + rise) - x;
    double v = 1.0;
    if (from_left <= 0.0 || from_right <= 0.0)
      v = 0.0;
    else {
      if (from_left < rise) v = std::min(v, shoulder(from_left / rise));
      if (from_right < rise) v = std::min(v, shoulder(from_right / rise));
    }
    m.v[i] = v;
  }
  return normalize_density(std::move(m));
}

// Constant terminal payoff.
inline TimeSlice constant_value(const Grid& grid, double value) {
  if (!(value >= 0.0))
    fail(ErrorKind::invalid_data, "constant_value: payoff must be nonnegative");
  return TimeSlice(grid, value);
}

// Monotone smoothstep ramp scaled so that the peak slope (attained at L/2)
// equals `slope` exactly.  Flat at both walls, zero at x = 0.
inline TimeSlice ramp_value(const Grid& grid, double slope) {
  if (!(slope >= 0.0))
    fail(ErrorKind::invalid_data, "ramp_value: slope must be nonnegative");
  const double amp = (2.0 / 3.0) * slope * grid.L;
  TimeSlice u(grid);
  for (int i = 0; i <= grid.nx; ++i) {
    const double z = grid.x(i) / grid.L;
    u.v[i] = amp * z * z * (3.0 - 2.0 * z);
  }
  return u;
}

// Piecewise-linear interpolation of a sorted (x, value) table onto the grid.
// The table must cover [0, L].
inline TimeSlice table_value(const Grid& grid,
                             const std::vector<std::pair<double, double>>& table) {
  if (table.size() < 2)
    fail(ErrorKind::invalid_data, "table_value: need at least two rows");
  for (std::size_t j = 1; j < table.size(); ++j)
    if (!(table[j].first > table[j - 1].first))
      fail(ErrorKind::invalid_data, "table_value: x column must increase");
  if (table.front().first > 1e-12 || table.back().first < grid.L - 1e-12)
    fail(ErrorKind::invalid_data, "table_value: table must cover [0, L]");
  TimeSlice u(grid);
  std::size_t j = 0;
  for (int i = 0; i <= grid.nx; ++i) {
    const double x = std::min(grid.x(i), table.back().first);
    while (j + 2 < table.size() && table[j + 1].first < x) ++j;
    const auto [x0, v0] = table[j];
    const auto [x1, v1] = table[j + 1];
    const double w = std::clamp((x - x0) / (x1 - x0), 0.0, 1.0);
    u.v[i] = v0 + w * (v1 - v0);
  }
  return u;
}

}  // namespace mfg1d
