#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "grid.hpp"
#include "market.hpp"
#include "tridiagonal.hpp"

namespace mfg1d {

struct HjbOptions {
  enum class Scheme { semi_implicit, fully_implicit_newton };
  Scheme scheme = Scheme::semi_implicit;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
};

// Godunov flux for the convex Hamiltonian H(p) = (f - p)^2 / 4 fed with the
// backward and forward one-sided slopes.  For a convex H with minimum at
// p = f the minimax collapses to the extremal form below, which is monotone
// (nonincreasing in p_minus, nondecreasing in p_plus) -- that monotonicity
// is what keeps the explicit sigma = 0 march stable under the CFL bound.
inline double godunov_hamiltonian(double p_minus, double p_plus, double f) {
  const double down = std::max(f - p_minus, 0.0);
  const double up = std::max(p_plus - f, 0.0);
  const double s = std::max(down, up);
  return 0.25 * s * s;
}

namespace detail {

// One-sided differences of a slice with reflection ghosts u_{-1} = u_1 and
// u_{nx+1} = u_{nx-1}.  diff_l[i] = u_i - u_{i-1}, diff_r[i] = u_{i+1} - u_i.
// The reflected values make the wall rows of every stencil a plain
// difference of existing nodes, so constant slices produce exact zeros.
inline void one_sided_diffs(std::span<const double> u, std::span<double> diff_l,
                            std::span<double> diff_r) {
  const std::size_t n = u.size();
  for (std::size_t i = 0; i + 1 < n; ++i) diff_r[i] = u[i + 1] - u[i];
  diff_r[n - 1] = u[n - 2] - u[n - 1];
  diff_l[0] = u[0] - u[1];
  for (std::size_t i = 1; i < n; ++i) diff_l[i] = u[i] - u[i - 1];
}

struct HjbWorkspace {
  std::vector<double> diff_l, diff_r, godunov, rhs, sub, diag, sup, sol, scratch;
  explicit HjbWorkspace(std::size_t n)
      : diff_l(n), diff_r(n), godunov(n), rhs(n), sub(n), diag(n), sup(n),
        sol(n), scratch(n) {}
};

// Explicit part shared by every scheme at one time level: Godunov
// Hamiltonian values from the one-sided slopes of `u` against drift f.
inline void godunov_row(const HjbWorkspace& w, double f, double dx,
                        std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = godunov_hamiltonian(w.diff_l[i] / dx, w.diff_r[i] / dx, f);
}

}  // namespace detail

// Backward solve of the value-function equation
//   u_t + (sigma^2/2) u_xx - r u + ((f(t) - u_x)/2)^2 = 0,   u(T) = u_T,
// with reflecting walls (or a pinned left wall for the Dirichlet variant).
//
// sigma > 0 marches backward Euler on the diffusion with the Hamiltonian
// taken either from the known level (semi_implicit) or from the unknown
// level via a semismooth Newton loop (fully_implicit_newton).  sigma = 0
// always uses the explicit monotone march: there is no diffusion left to
// make implicitness worthwhile, and the Godunov flux plus CFL check is the
// stability mechanism.
//
// The implicit solves are written in increment form with the constant mode
// split off analytically (the system matrix maps the constant vector to
// (1/dt + r) times itself).  Spatially constant data therefore stays exactly
// constant in floating point, which the gradient-bound checks rely on.
inline ScalarField solve_hjb(const MarketPath& path, const TimeSlice& u_T,
                             const MarketParams& params, const Grid& grid,
                             BoundarySpec bc, const HjbOptions& opts = {}) {
  if (!(path.grid == grid) || !(u_T.grid == grid))
    fail(ErrorKind::grid_mismatch, "solve_hjb: operands on different grids");
  if (path.f.size() != static_cast<std::size_t>(grid.slices()))
    fail(ErrorKind::grid_mismatch, "solve_hjb: drift path length != nt + 1");
  if (grid.nx < 2) fail(ErrorKind::grid_too_small, "solve_hjb: need nx >= 2");
  if (!(opts.newton_tol > 0.0) || opts.newton_max_iter < 1)
    fail(ErrorKind::invalid_parameter, "solve_hjb: bad Newton options");
  if (!all_finite(path.f) || !all_finite(u_T.v))
    fail(ErrorKind::invalid_data, "solve_hjb: non-finite input");
  for (double v : u_T.v)
    if (v < 0.0)
      fail(ErrorKind::invalid_data, "solve_hjb: terminal payoff must be >= 0");

  const int n = grid.nodes();
  const double dx = grid.dx();
  const double dt = grid.dt();
  const double r = params.r;
  const double half_sig2 = 0.5 * params.sigma * params.sigma;
  const bool dirichlet = bc == BoundarySpec::DirichletLeft;

  ScalarField u(grid, FieldRole::value_function);
  std::copy(u_T.v.begin(), u_T.v.end(), u.row(grid.nt).begin());

  detail::HjbWorkspace w(static_cast<std::size_t>(n));

  // Diffusion stencil of the implicit matrix.  Wall rows carry the doubled
  // neighbor coupling produced by the reflection ghost.
  const double off = half_sig2 / (dx * dx);
  auto build_matrix = [&](std::span<const double> extra_diag,
                          std::span<const double> extra_sub,
                          std::span<const double> extra_sup) {
    for (int i = 0; i < n; ++i) {
      w.diag[i] = 1.0 / dt + r + 2.0 * off + extra_diag[i];
      w.sub[i] = -off + extra_sub[i];
      w.sup[i] = -off + extra_sup[i];
    }
    w.sub[n - 1] = -2.0 * off + extra_sub[n - 1];
    w.sup[0] = -2.0 * off + extra_sup[0];
    if (dirichlet) {
      w.diag[0] = 1.0;
      w.sup[0] = 0.0;
    }
  };

  const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);

  for (int k = grid.nt - 1; k >= 0; --k) {
    const double fk = path.f[static_cast<std::size_t>(k)];
    auto u_next = u.row(k + 1);
    auto u_cur = u.row(k);

    if (half_sig2 == 0.0) {
      // Explicit monotone march.  CFL: the active characteristic speed is
      // |f - p| / 2 <= max one-sided |f - p|, checked per step.
      detail::one_sided_diffs(u_next, w.diff_l, w.diff_r);
      double speed = 0.0;
      for (int i = 0; i < n; ++i) {
        speed = std::max(speed, std::abs(fk - w.diff_l[i] / dx));
        speed = std::max(speed, std::abs(fk - w.diff_r[i] / dx));
      }
      if (dt * speed > dx * (1.0 + 1e-9))
        fail(ErrorKind::cfl_violation,
             "solve_hjb: sigma = 0 explicit step violates dt <= dx/max|f - u_x|");
      detail::godunov_row(w, fk, dx, w.godunov);
      for (int i = 0; i < n; ++i)
        u_cur[i] = (u_next[i] + dt * w.godunov[i]) / (1.0 + r * dt);
      if (dirichlet) u_cur[0] = 0.0;
      continue;
    }

    if (opts.scheme == HjbOptions::Scheme::semi_implicit) {
      // rho = explicit residual of the known level; solve B delta = rho.
      detail::one_sided_diffs(u_next, w.diff_l, w.diff_r);
      detail::godunov_row(w, fk, dx, w.godunov);
      for (int i = 0; i < n; ++i) {
        const double lap = (w.diff_r[i] - w.diff_l[i]) / (dx * dx);
        w.rhs[i] = half_sig2 * lap - r * u_next[i] + w.godunov[i];
      }
      build_matrix(zeros, zeros, zeros);
      if (!dirichlet) {
        // Split off the constant mode: B maps 1 to (1/dt + r) 1.
        const double rho0 = w.rhs[0];
        for (int i = 0; i < n; ++i) w.rhs[i] -= rho0;
        thomas_solve(w.sub, w.diag, w.sup, w.rhs, w.sol, w.scratch);
        const double shift = rho0 / (1.0 / dt + r);
        for (int i = 0; i < n; ++i) u_cur[i] = u_next[i] + w.sol[i] + shift;
      } else {
        w.rhs[0] = 0.0 - u_next[0];  // pin u(t, 0) = 0
        thomas_solve(w.sub, w.diag, w.sup, w.rhs, w.sol, w.scratch);
        for (int i = 0; i < n; ++i) u_cur[i] = u_next[i] + w.sol[i];
      }
    } else {
      // Semismooth Newton on the fully implicit step.  The Jacobian of the
      // Godunov flux only ever reinforces the M-matrix structure (active
      // slope s adds s/(2 dx) to the diagonal and subtracts it from one
      // neighbor), so the same Thomas solve applies.
      std::vector<double> v(u_next.begin(), u_next.end());
      std::vector<double> F(static_cast<std::size_t>(n));
      std::vector<double> jd(static_cast<std::size_t>(n)),
          jsub(static_cast<std::size_t>(n)), jsup(static_cast<std::size_t>(n));
      bool done = false;
      for (int it = 0; it < opts.newton_max_iter; ++it) {
        detail::one_sided_diffs(v, w.diff_l, w.diff_r);
        std::fill(jd.begin(), jd.end(), 0.0);
        std::fill(jsub.begin(), jsub.end(), 0.0);
        std::fill(jsup.begin(), jsup.end(), 0.0);
        for (int i = 0; i < n; ++i) {
          const double pm = w.diff_l[i] / dx;
          const double pp = w.diff_r[i] / dx;
          const double down = std::max(fk - pm, 0.0);
          const double up = std::max(pp - fk, 0.0);
          const double lap = (w.diff_r[i] - w.diff_l[i]) / (dx * dx);
          F[i] = (u_next[i] - v[i]) / dt + half_sig2 * lap - r * v[i] +
                 godunov_hamiltonian(pm, pp, fk);
          // Active branch of the flux derivative, negated into A = -J.
          if (down >= up && down > 0.0) {
            const double g = 0.5 * down / dx;
            jd[i] += g;
            if (i > 0)
              jsub[i] -= g;
            else
              jsup[0] -= g;  // reflected slope couples node 0 to node 1
          } else if (up > 0.0) {
            const double g = 0.5 * up / dx;
            jd[i] += g;
            if (i + 1 < n)
              jsup[i] -= g;
            else
              jsub[n - 1] -= g;
          }
        }
        build_matrix(jd, jsub, jsup);
        if (dirichlet) F[0] = 0.0 - v[0];
        double step;
        if (!dirichlet) {
          const double F0 = F[0];
          for (int i = 0; i < n; ++i) w.rhs[i] = F[i] - F0;
          thomas_solve(w.sub, w.diag, w.sup, w.rhs, w.sol, w.scratch);
          const double shift = F0 / (1.0 / dt + r);
          step = 0.0;
          for (int i = 0; i < n; ++i) {
            const double s = w.sol[i] + shift;
            v[static_cast<std::size_t>(i)] += s;
            step = std::max(step, std::abs(s));
          }
        } else {
          thomas_solve(w.sub, w.diag, w.sup, F, w.sol, w.scratch);
          step = 0.0;
          for (int i = 0; i < n; ++i) {
            v[static_cast<std::size_t>(i)] += w.sol[i];
            step = std::max(step, std::abs(w.sol[i]));
          }
        }
        if (!all_finite(v))
          fail(ErrorKind::newton_divergence, "solve_hjb: Newton iterate blew up");
        if (step <= opts.newton_tol) {
          done = true;
          break;
        }
      }
      if (!done)
        fail(ErrorKind::newton_divergence,
             "solve_hjb: Newton failed to reach tolerance");
      std::copy(v.begin(), v.end(), u_cur.begin());
    }
  }

  if (!all_finite(u.data))
    fail(ErrorKind::invalid_data, "solve_hjb: produced non-finite values");
  return u;
}

// Sup norm of the pointwise equation residual over interior nodes, with the
// centered gradient and the implicit-side time level, i.e. the quantity the
// scheme drives to O(dt + dx) truncation.
inline double hjb_residual(const ScalarField& u, const MarketPath& path,
                           const MarketParams& params, const Grid& grid) {
  if (!(u.grid == grid) || !(path.grid == grid))
    fail(ErrorKind::grid_mismatch, "hjb_residual: operands on different grids");
  if (grid.nx < 2)
    fail(ErrorKind::grid_too_small, "hjb_residual: need nx >= 2");
  const double dx = grid.dx();
  const double dt = grid.dt();
  const double half_sig2 = 0.5 * params.sigma * params.sigma;
  double worst = 0.0;
  for (int k = 0; k < grid.nt; ++k) {
    const auto cur = u.row(k);
    const auto next = u.row(k + 1);
    const double fk = path.f[static_cast<std::size_t>(k)];
    for (int i = 1; i < grid.nx; ++i) {
      const double ut = (next[i] - cur[i]) / dt;
      const double uxx = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / (dx * dx);
      const double ux = (cur[i + 1] - cur[i - 1]) / (2.0 * dx);
      const double q = 0.5 * (fk - ux);
      const double res = ut + half_sig2 * uxx - params.r * cur[i] + q * q;
      worst = std::max(worst, std::abs(res));
    }
  }
  return worst;
}

}  // namespace mfg1d
