#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fixed_point.hpp"
#include "fokker_planck.hpp"
#include "grid.hpp"
#include "market.hpp"
#include "test_functions.hpp"

namespace mfg1d {

// Real value extended with a tagged +infinity.  Kept separate from the
// floating-point infinity so "the cost blew up" is an explicit state and not
// something arithmetic can accidentally launder into a NaN.
struct ExtReal {
  double value = 0.0;
  bool infinite = false;

  static ExtReal inf() { return {0.0, true}; }
  bool is_finite() const { return !infinite; }
};

// Kinetic cost density of a (mass, momentum) node pair.  Nodes with
// 0 < m < 1e-14 but non-vanishing momentum are ruled infeasible rather than
// evaluated: the quotient would overflow into a huge-but-finite number, and
// the continuum cost of moving mass that thin is unbounded anyway.
inline ExtReal psi(double m, double w) {
  if (m < 0.0) fail(ErrorKind::negative_density, "psi: m must be >= 0");
  if (m == 0.0) return w == 0.0 ? ExtReal{} : ExtReal::inf();
  if (m < 1e-14 && std::abs(w) > 1e-7) return ExtReal::inf();
  return {w * w / m, false};
}

enum class PairSource { equilibrium, competitor };

// Candidate point of the cost functional: a density trajectory and its
// momentum w = q*m, constrained to solve the forward equation.
struct ControlPair {
  ScalarField m;
  ScalarField w;
  PairSource source = PairSource::competitor;
};

// Cost of a control pair:
//   J = integral e^{-rt} (Psi(m, w) - b_bar w)  +  c_bar integral e^{-rt}
//       (integral w dx)^2  -  integral e^{-rT} u_T m(T).
// Left-point rule in time, trapezoid in space -- the same quadrature the
// energy identities use, so cost differences and gap formulas cancel
// discretization errors instead of accumulating them.
inline ExtReal evaluate_J(const ControlPair& pair, const TimeSlice& u_T,
                          const MarketParams& params, const Grid& grid) {
  if (!(pair.m.grid == grid) || !(pair.w.grid == grid) || !(u_T.grid == grid))
    fail(ErrorKind::grid_mismatch, "evaluate_J: operands on different grids");
  if (!all_finite(pair.m.data) || !all_finite(pair.w.data))
    fail(ErrorKind::infeasible_pair, "evaluate_J: non-finite pair");
  for (double v : pair.m.data)
    if (v < 0.0)
      fail(ErrorKind::infeasible_pair, "evaluate_J: negative density node");

  const double dx = grid.dx();
  const double dt = grid.dt();
  std::vector<double> row(static_cast<std::size_t>(grid.nodes()));
  double acc = 0.0;
  for (int k = 0; k < grid.nt; ++k) {
    const auto mk = pair.m.row(k);
    const auto wk = pair.w.row(k);
    for (int i = 0; i <= grid.nx; ++i) {
      const ExtReal p = psi(mk[i], wk[i]);
      if (p.infinite) return ExtReal::inf();
      row[i] = p.value - params.b_bar * wk[i];
    }
    const double disc = dt * std::exp(-params.r * grid.t(k));
    const double wbar = trapezoid(wk, dx);
    acc += disc * (trapezoid(row, dx) + params.c_bar * wbar * wbar);
  }
  acc -= std::exp(-params.r * grid.T) *
         trapezoid_product(u_T.v, pair.m.row(grid.nt), dx);
  return {acc, false};
}

// Feasible competitor generated by pushing m0 forward under an arbitrary
// bounded control.  The constraint (the forward equation) holds by
// construction, which is the whole point: candidates enter the cost
// comparison through their control, never through hand-edited densities.
inline ControlPair competitor_from_control(const ScalarField& q_tilde,
                                           const TimeSlice& m0,
                                           const MarketParams& params,
                                           const Grid& grid, BoundarySpec bc,
                                           const FpOptions& opts = {}) {
  ControlPair pair;
  pair.m = solve_fp(q_tilde, m0, params, grid, bc, opts);
  pair.w = ScalarField(grid, FieldRole::flux);
  for (std::size_t n = 0; n < pair.w.data.size(); ++n)
    pair.w.data[n] = q_tilde.data[n] * pair.m.data[n];
  pair.source = PairSource::competitor;
  return pair;
}

inline ControlPair equilibrium_pair(const MfgSolution& sol) {
  ControlPair pair;
  pair.m = sol.m;
  pair.w = ScalarField(sol.m.grid, FieldRole::flux);
  for (std::size_t n = 0; n < pair.w.data.size(); ++n)
    pair.w.data[n] = sol.q.data[n] * sol.m.data[n];
  pair.source = PairSource::equilibrium;
  return pair;
}

// Max-norm of the pointwise optimality condition
//   b_bar - 2q - 2 c_bar integral(q m) - u_x
// over the whole lattice.  For a self-consistent solution this vanishes
// algebraically (not just to solver tolerance), so the measured value is a
// direct probe of internal consistency.
inline double first_order_residual(const MfgSolution& sol,
                                   const MarketParams& params,
                                   const Grid& grid) {
  if (!(sol.u.grid == grid))
    fail(ErrorKind::grid_mismatch, "first_order_residual: wrong grid");
  const double dx = grid.dx();
  std::vector<double> ux(static_cast<std::size_t>(grid.nodes()));
  double worst = 0.0;
  for (int k = 0; k <= grid.nt; ++k) {
    derivative_into(sol.u.row(k), ux, dx);
    const auto qk = sol.q.row(k);
    const auto mk = sol.m.row(k);
    const double qbar = trapezoid_product(qk, mk, dx);
    for (int i = 0; i <= grid.nx; ++i) {
      const double res =
          params.b_bar - 2.0 * qk[i] - 2.0 * params.c_bar * qbar - ux[i];
      worst = std::max(worst, std::abs(res));
    }
  }
  return worst;
}

// Cost excess of a competitor over the equilibrium, evaluated through the
// gap representation rather than as a difference of two large numbers:
//   gap = integral e^{-rt} m_tilde (q_tilde - q)^2
//       + c_bar integral e^{-rt} (integral (w_tilde - w) dx)^2.
// The cross term of the expansion carries the first-order factor and
// vanishes at the equilibrium control, so it is dropped.  The equilibrium
// control q is reconstructed from u and the equilibrium density through the
// market coupling -- never by dividing w by m, which is ill-posed where the
// density vanishes.  m_tilde (q_tilde - q)^2 itself is evaluated as
// Psi(m_tilde, w_tilde - q m_tilde) for the same reason.
inline double optimality_gap(const ControlPair& equilibrium,
                             const ControlPair& competitor,
                             const ScalarField& u, const MarketParams& params,
                             const Grid& grid) {
  if (!(equilibrium.m.grid == grid) || !(competitor.m.grid == grid) ||
      !(u.grid == grid))
    fail(ErrorKind::grid_mismatch, "optimality_gap: operands on different grids");
  for (double v : competitor.m.data)
    if (v < 0.0)
      fail(ErrorKind::infeasible_pair, "optimality_gap: negative competitor density");

  const double dx = grid.dx();
  const double dt = grid.dt();
  std::vector<double> ux(static_cast<std::size_t>(grid.nodes()));
  std::vector<double> q(static_cast<std::size_t>(grid.nodes()));
  std::vector<double> row(static_cast<std::size_t>(grid.nodes()));
  double gap = 0.0;
  for (int k = 0; k < grid.nt; ++k) {
    derivative_into(u.row(k), ux, dx);
    const auto me = equilibrium.m.row(k);
    const auto we = equilibrium.w.row(k);
    const auto mc = competitor.m.row(k);
    const auto wc = competitor.w.row(k);
    const double f =
        params.b + params.c * trapezoid_product(ux, me, dx);
    for (int i = 0; i <= grid.nx; ++i) q[i] = 0.5 * (f - ux[i]);
    for (int i = 0; i <= grid.nx; ++i) {
      const ExtReal p = psi(mc[i], wc[i] - q[i] * mc[i]);
      if (p.infinite) return std::numeric_limits<double>::infinity();
      row[i] = p.value;
    }
    const double disc = dt * std::exp(-params.r * grid.t(k));
    const double dbar = trapezoid(wc, dx) - trapezoid(we, dx);
    gap += disc * (trapezoid(row, dx) + params.c_bar * dbar * dbar);
  }
  return gap;
}

// Deterministic 20-control corpus probing both terms of the gap formula:
// constants (including ones large enough to push against the walls),
// single-frequency sinusoidal perturbations of the equilibrium control at
// several amplitudes, and sign-flipped drifts.
inline std::vector<ScalarField> competitor_controls(const MfgSolution& sol,
                                                    const Grid& grid) {
  if (!(sol.q.grid == grid))
    fail(ErrorKind::grid_mismatch, "competitor_controls: wrong grid");
  std::vector<ScalarField> out;
  out.reserve(20);
  for (double level : {0.0, 0.25, 0.5, 1.0})
    out.emplace_back(grid, FieldRole::control, level);
  struct Mode {
    double amp;
    int freq;
  };
  const Mode modes[] = {{0.1, 1},  {-0.1, 1}, {0.2, 1},  {-0.2, 1},
                        {0.3, 1},  {-0.3, 1}, {0.1, 2},  {-0.1, 2},
                        {0.2, 2},  {-0.2, 2}, {0.1, 3},  {-0.1, 3},
                        {0.2, 3},  {-0.2, 3}};
  for (const Mode& mode : modes) {
    ScalarField qt = sol.q;
    qt.role = FieldRole::control;
    for (int k = 0; k <= grid.nt; ++k) {
      auto rowk = qt.row(k);
      for (int i = 0; i <= grid.nx; ++i)
        rowk[i] += mode.amp *
                   std::sin(mode.freq * std::numbers::pi * grid.x(i) / grid.L);
    }
    out.push_back(std::move(qt));
  }
  {
    ScalarField flipped = sol.q;
    for (double& v : flipped.data) v = -v;
    out.push_back(std::move(flipped));
  }
  out.emplace_back(grid, FieldRole::control, -0.25);
  return out;
}

}  // namespace mfg1d
