#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "grid.hpp"
#include "market.hpp"
#include "tridiagonal.hpp"

namespace mfg1d {

struct FpOptions {
  enum class FluxForm { upwind, central_with_limiter };
  FluxForm flux_form = FluxForm::upwind;
  // Clamp rounding-level negative nodes after each implicit step.  Off by
  // default: the upwind assembly below is sign-safe on its own, and silent
  // clamping would mask a genuinely unstable configuration.
  bool positivity_clip = false;
};

// Forward march of the population density
//   m_t = (sigma^2/2) m_xx + (q m)_x,   m(0) = m0,
// as a node-centered finite-volume scheme: cell weights dx (dx/2 at the
// walls), implicit diffusion, explicit upwind transport.  Writing the update
// per interface flux makes conservation a telescoping identity -- under
// reflection the wall fluxes simply do not exist -- and grouping the
// explicit terms so every m-coefficient is nonnegative makes positivity
// exact in floating point, not a tolerance statement (see thomas_solve).
//
// The equation transports mass with velocity -q, so the upwind donor at an
// interface is the right cell when q > 0.  DirichletLeft pins m(t, 0) = 0
// and keeps the first interface active: whatever crosses it is absorbed,
// and the total mass becomes nonincreasing instead of conserved.
inline ScalarField solve_fp(const ScalarField& q, const TimeSlice& m0,
                            const MarketParams& params, const Grid& grid,
                            BoundarySpec bc, const FpOptions& opts = {}) {
  if (!(q.grid == grid) || !(m0.grid == grid))
    fail(ErrorKind::grid_mismatch, "solve_fp: operands on different grids");
  if (grid.nx < 2) fail(ErrorKind::grid_too_small, "solve_fp: need nx >= 2");
  if (!all_finite(q.data) || !all_finite(m0.v))
    fail(ErrorKind::invalid_data, "solve_fp: non-finite input");
  for (double v : m0.v)
    if (v < 0.0)
      fail(ErrorKind::negative_initial_data, "solve_fp: m0 has negative entries");
  if (bc == BoundarySpec::NeumannReflection &&
      std::abs(trapezoid(m0) - 1.0) > 1e-10)
    fail(ErrorKind::mass_mismatch, "solve_fp: m0 mass not 1 within 1e-10");

  const int n = grid.nodes();
  const double dx = grid.dx();
  const double dt = grid.dt();
  const double half_sig2 = 0.5 * params.sigma * params.sigma;
  const bool dirichlet = bc == BoundarySpec::DirichletLeft;
  const bool limiter = opts.flux_form == FpOptions::FluxForm::central_with_limiter;

  std::vector<double> weight(static_cast<std::size_t>(n), dx);
  weight[0] = weight[static_cast<std::size_t>(n - 1)] = 0.5 * dx;

  ScalarField m(grid, FieldRole::density);
  std::copy(m0.v.begin(), m0.v.end(), m.row(0).begin());

  // Interface j sits between nodes j and j+1 (j = 0 .. nx-1).
  std::vector<double> a_plus(static_cast<std::size_t>(grid.nx));
  std::vector<double> a_minus(static_cast<std::size_t>(grid.nx));
  std::vector<double> adv_flux(static_cast<std::size_t>(grid.nx));
  std::vector<double> slope(static_cast<std::size_t>(n));
  std::vector<double> rhs(static_cast<std::size_t>(n)),
      diag(static_cast<std::size_t>(n)), sub(static_cast<std::size_t>(n)),
      sup(static_cast<std::size_t>(n)), sol(static_cast<std::size_t>(n)),
      scratch(static_cast<std::size_t>(n));

  auto minmod = [](double a, double b) {
    if (a > 0.0 && b > 0.0) return std::min(a, b);
    if (a < 0.0 && b < 0.0) return std::max(a, b);
    return 0.0;
  };

  for (int k = 0; k < grid.nt; ++k) {
    const auto qk = q.row(k);
    const auto m_cur = m.row(k);
    auto m_next = m.row(k + 1);

    for (int j = 0; j < grid.nx; ++j) {
      const double qmid = 0.5 * (qk[j] + qk[j + 1]);
      a_plus[j] = std::max(qmid, 0.0);
      a_minus[j] = std::max(-qmid, 0.0);
    }

    // Explicit stability bound on the transport part.  Enforced as an error
    // only when there is no diffusion; with sigma > 0 a violation merely
    // loses the positivity guarantee and is left to the invariant checks.
    if (half_sig2 == 0.0) {
      const double safety = limiter ? 0.5 : 1.0;
      for (int i = 0; i < n; ++i) {
        const double outflow = (i < grid.nx ? a_minus[i] : 0.0) +
                               (i > 0 ? a_plus[i - 1] : 0.0);
        if (dt * outflow > safety * weight[i] * (1.0 + 1e-12))
          fail(ErrorKind::cfl_violation,
               "solve_fp: sigma = 0 explicit step violates the transport CFL "
               "bound");
      }
    }

    if (!limiter) {
      // First-order upwind, grouped so all coefficients are nonnegative.
      for (int i = 0; i < n; ++i) {
        double keep = weight[i] / dt;
        double gain = 0.0;
        if (i < grid.nx) {  // right interface i
          keep -= a_minus[i];
          gain += a_plus[i] * m_cur[i + 1];
        }
        if (i > 0) {  // left interface i-1
          keep -= a_plus[i - 1];
          gain += a_minus[i - 1] * m_cur[i - 1];
        }
        rhs[i] = m_cur[i] * std::max(keep, 0.0) + gain;
        // keep < 0 only in a sigma > 0 run beyond the CFL bound; flooring it
        // trades a little mass for not injecting negative density.
      }
    } else {
      // Second-order donor reconstruction with minmod slopes (wall nodes
      // stay first-order).  Conservative by construction; positivity holds
      // under the halved CFL factor checked above.
      slope[0] = slope[static_cast<std::size_t>(n - 1)] = 0.0;
      for (int i = 1; i + 1 < n; ++i)
        slope[i] = minmod(m_cur[i + 1] - m_cur[i], m_cur[i] - m_cur[i - 1]) / dx;
      for (int j = 0; j < grid.nx; ++j) {
        const double qmid = a_plus[j] - a_minus[j];
        const double face = qmid > 0.0
                                ? m_cur[j + 1] - 0.5 * dx * slope[j + 1]
                                : m_cur[j] + 0.5 * dx * slope[j];
        adv_flux[j] = qmid * face;
      }
      for (int i = 0; i < n; ++i) {
        double div = 0.0;
        if (i < grid.nx) div += adv_flux[i];
        if (i > 0) div -= adv_flux[i - 1];
        rhs[i] = m_cur[i] * (weight[i] / dt) + div;
      }
    }

    if (half_sig2 == 0.0) {
      for (int i = 0; i < n; ++i) m_next[i] = rhs[i] * dt / weight[i];
      if (dirichlet) m_next[0] = 0.0;
      continue;
    }

    const double dcoef = half_sig2 / dx;
    for (int i = 0; i < n; ++i) {
      const int faces = (i > 0 ? 1 : 0) + (i < grid.nx ? 1 : 0);
      diag[i] = weight[i] / dt + faces * dcoef;
      sub[i] = i > 0 ? -dcoef : 0.0;
      sup[i] = i < grid.nx ? -dcoef : 0.0;
    }
    if (dirichlet) {
      diag[0] = 1.0;
      sup[0] = 0.0;
      rhs[0] = 0.0;
    }
    thomas_solve(sub, diag, sup, rhs, sol, scratch);
    std::copy(sol.begin(), sol.end(), m_next.begin());
    if (opts.positivity_clip)
      for (int i = 0; i < n; ++i) m_next[i] = std::max(m_next[i], 0.0);
  }

  if (!all_finite(m.data))
    fail(ErrorKind::invalid_data, "solve_fp: produced non-finite values");
  return m;
}

// Pointwise flux diagnostic (sigma^2/2) m_x + q m on the nodes of one slice.
// The wall entries are the imposed boundary fluxes, i.e. exactly zero under
// reflection; interior entries use the centered derivative.
inline TimeSlice fp_flux(const TimeSlice& m, const TimeSlice& q,
                         const MarketParams& params) {
  if (!(m.grid == q.grid))
    fail(ErrorKind::grid_mismatch, "fp_flux: grids differ");
  const TimeSlice mx = derivative(m);
  TimeSlice flux(m.grid);
  const double half_sig2 = 0.5 * params.sigma * params.sigma;
  for (std::size_t i = 0; i < flux.v.size(); ++i)
    flux.v[i] = half_sig2 * mx.v[i] + q.v[i] * m.v[i];
  flux.v.front() = 0.0;
  flux.v.back() = 0.0;
  return flux;
}

// Checks that no time slice concentrates more mass above level 2K than the
// initial excess above K allows (plus a rounding allowance).  A sharp tail
// bound of this shape rules out mass escaping to spikes as sigma shrinks.
inline bool uniform_integrability_check(const ScalarField& m,
                                        const TimeSlice& m0, double K) {
  if (!(m.grid == m0.grid))
    fail(ErrorKind::grid_mismatch, "uniform_integrability_check: grids differ");
  const double dx = m.grid.dx();
  std::vector<double> excess(m0.v.size());
  for (std::size_t i = 0; i < m0.v.size(); ++i)
    excess[i] = std::max(m0.v[i] - K, 0.0);
  const double budget = 2.0 * trapezoid(excess, dx) + 1e-8;
  std::vector<double> tail(m0.v.size());
  for (int k = 0; k <= m.grid.nt; ++k) {
    const auto row = m.row(k);
    for (std::size_t i = 0; i < tail.size(); ++i)
      tail[i] = row[i] >= 2.0 * K ? row[i] : 0.0;
    if (trapezoid(tail, dx) > budget) return false;
  }
  return true;
}

}  // namespace mfg1d
