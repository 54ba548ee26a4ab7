#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fokker_planck.hpp"
#include "grid.hpp"
#include "hjb.hpp"
#include "market.hpp"
#include "test_functions.hpp"

namespace mfg1d {

struct FixedPointOptions {
  double damping = 0.5;  // relaxation on the drift path update
  double tol = 1e-8;     // sup-norm tolerance on the drift path
  int max_iter = 200;
  // Starting drift path; defaults to the decoupled value f = b.
  std::optional<std::vector<double>> initial_f;
  HjbOptions hjb;
  FpOptions fp;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;  // sup|f_new - f| per iteration
  bool converged = false;
  double wall_time_seconds = 0.0;

  // Invariant flags with the measurements backing them.
  bool mass_conserved = false;  // Dirichlet: mass nonincreasing
  bool u_nonnegative = false;
  bool gradient_bound = false;
  bool energy_gap_zero = false;
  double mass_error_max = 0.0;
  double u_min = 0.0;
  double max_abs_ux = 0.0;
  double grad_bound_value = 0.0;  // e^{rT} * max |u_T'|
  double grad_bound_ratio = 0.0;  // measured / bound (0 when both are zero)
  double energy_gap_term1 = 0.0;  // gap between the last two iterates
  double energy_gap_term2 = 0.0;
};

// Converged equilibrium: value function, density, equilibrium production
// rate q = (f - u_x)/2, and the scalar market history.
struct MfgSolution {
  ScalarField u;
  ScalarField m;
  ScalarField q;
  MarketPath path;
  SolveReport report;
};

// Thrown when the Picard loop exhausts max_iter.  Carries the last iterate
// so sweeps can record the partial result and keep going.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, MfgSolution partial)
      : Error(ErrorKind::no_convergence, what),
        partial_(std::make_shared<const MfgSolution>(std::move(partial))) {}
  const MfgSolution& partial() const noexcept { return *partial_; }
  std::shared_ptr<const MfgSolution> partial_ptr() const noexcept {
    return partial_;
  }

 private:
  std::shared_ptr<const MfgSolution> partial_;
};

struct EnergyGapTerms {
  double term1 = 0.0;  // discounted (q1 - q2)^2 (m1 + m2) integral
  double term2 = 0.0;  // discounted aggregate-production mismatch
};

namespace detail {

// Shared kernel of the uniqueness energy identity.  Left-point rule in time
// (the same rule the cost functional uses), trapezoid in space.
inline EnergyGapTerms energy_gap_fields(const ScalarField& q1,
                                        const ScalarField& m1,
                                        const ScalarField& q2,
                                        const ScalarField& m2, double r,
                                        double aggregate_coef,
                                        const Grid& grid) {
  const double dx = grid.dx();
  const double dt = grid.dt();
  std::vector<double> row(static_cast<std::size_t>(grid.nodes()));
  EnergyGapTerms out;
  for (int k = 0; k < grid.nt; ++k) {
    const double disc = dt * std::exp(-r * grid.t(k));
    const auto q1k = q1.row(k), m1k = m1.row(k);
    const auto q2k = q2.row(k), m2k = m2.row(k);
    for (int i = 0; i <= grid.nx; ++i) {
      const double dq = q1k[i] - q2k[i];
      row[i] = dq * dq * (m1k[i] + m2k[i]);
    }
    out.term1 += disc * trapezoid(row, dx);
    const double bar1 = trapezoid_product(q1k, m1k, dx);
    const double bar2 = trapezoid_product(q2k, m2k, dx);
    out.term2 += disc * (bar1 - bar2) * (bar1 - bar2);
  }
  out.term2 *= aggregate_coef;
  return out;
}

inline ScalarField gradient_field(const ScalarField& u) {
  ScalarField ux(u.grid, u.role);
  for (int k = 0; k <= u.grid.nt; ++k)
    derivative_into(u.row(k), ux.row(k), u.grid.dx());
  return ux;
}

}  // namespace detail

// Both solutions must share a grid; the aggregate term carries the weight
// 2c/(1-c), which equals 2*c_bar identically.
inline EnergyGapTerms energy_gap(const MfgSolution& a, const MfgSolution& b,
                                 const MarketParams& params, const Grid& grid) {
  if (!(a.u.grid == grid) || !(b.u.grid == grid))
    fail(ErrorKind::grid_mismatch, "energy_gap: solutions on different grids");
  return detail::energy_gap_fields(a.q, a.m, b.q, b.m, params.r,
                                   2.0 * params.c_bar, grid);
}

// Same identity for the absorbing variant: the aggregate term carries the
// bare factor epsilon, and the discount rate still applies to both terms.
inline EnergyGapTerms energy_gap_dirichlet(const MfgSolution& a,
                                           const MfgSolution& b, double epsilon,
                                           const Grid& grid, double r) {
  if (!(a.u.grid == grid) || !(b.u.grid == grid))
    fail(ErrorKind::grid_mismatch,
         "energy_gap_dirichlet: solutions on different grids");
  return detail::energy_gap_fields(a.q, a.m, b.q, b.m, r, epsilon, grid);
}

// Picard iteration on the scalar drift path f(t): solve the backward value
// equation under f, push the density forward under q = (f - u_x)/2, close
// the loop through the market coupling, and relax.  Everything nonlocal
// about the system lives in this one scalar path, which is why iterating it
// (rather than whole fields) is both cheap and stable.
//
// After convergence the solution is re-derived once from the converged path
// and stored in self-consistent form: the stored f is recomputed from the
// stored (u_x, m), and the stored q is exactly (f - u_x)/2.  The variational
// first-order condition then holds to rounding rather than to the Picard
// tolerance.
inline MfgSolution solve_mfg(const TimeSlice& m0, const TimeSlice& u_T,
                             const MarketParams& params, const Grid& grid,
                             BoundarySpec bc, const FixedPointOptions& opts = {}) {
  if (!(m0.grid == grid) || !(u_T.grid == grid))
    fail(ErrorKind::grid_mismatch, "solve_mfg: data on a different grid");
  if (grid.nx < 2) fail(ErrorKind::grid_too_small, "solve_mfg: need nx >= 2");
  if (!(opts.damping > 0.0) || !(opts.damping <= 1.0) || !(opts.tol > 0.0) ||
      opts.max_iter < 1)
    fail(ErrorKind::invalid_parameter, "solve_mfg: bad iteration options");
  for (double v : u_T.v)
    if (v < 0.0)
      fail(ErrorKind::invalid_data, "solve_mfg: terminal payoff must be >= 0");
  for (double v : m0.v)
    if (v < 0.0)
      fail(ErrorKind::negative_initial_data, "solve_mfg: m0 has negative entries");
  const bool dirichlet = bc == BoundarySpec::DirichletLeft;
  if (!dirichlet && std::abs(trapezoid(m0) - 1.0) > 1e-10)
    fail(ErrorKind::mass_mismatch, "solve_mfg: m0 mass not 1 within 1e-10");
  if (dirichlet && (std::abs(u_T.v.front()) > 1e-12 || m0.v.front() > 1e-12))
    fail(ErrorKind::invalid_data,
         "solve_mfg: Dirichlet variant needs u_T(0) = 0 and m0(0) = 0");

  const auto t_start = std::chrono::steady_clock::now();
  const int slices = grid.slices();
  const double dx = grid.dx();

  std::vector<double> f;
  if (opts.initial_f) {
    f = *opts.initial_f;
    if (f.size() != static_cast<std::size_t>(slices))
      fail(ErrorKind::grid_mismatch, "solve_mfg: initial_f length != nt + 1");
    if (!all_finite(f))
      fail(ErrorKind::invalid_data, "solve_mfg: initial_f not finite");
  } else {
    f.assign(static_cast<std::size_t>(slices), params.b);
  }

  MarketPath path(grid);
  ScalarField u, ux, q, m;

  auto run_iterate = [&](const std::vector<double>& fv) {
    path.f = fv;
    u = solve_hjb(path, u_T, params, grid, bc, opts.hjb);
    ux = detail::gradient_field(u);
    q = ScalarField(grid, FieldRole::control);
    for (int k = 0; k < slices; ++k) {
      const double fk = fv[static_cast<std::size_t>(k)];
      auto qk = q.row(k);
      const auto uxk = ux.row(k);
      for (int i = 0; i <= grid.nx; ++i) qk[i] = 0.5 * (fk - uxk[i]);
    }
    m = solve_fp(q, m0, params, grid, bc, opts.fp);
  };

  auto coupled_f = [&](std::vector<double>& out) {
    for (int k = 0; k < slices; ++k) {
      const auto uxk = ux.row(k);
      const auto mk = m.row(k);
      const double I = trapezoid_product(uxk, mk, dx);
      if (!dirichlet) {
        out[static_cast<std::size_t>(k)] = params.b + params.c * I;
      } else {
        const double eta = trapezoid(mk, dx);
        out[static_cast<std::size_t>(k)] =
            2.0 / (2.0 + params.epsilon * eta) +
            params.epsilon / (2.0 + params.epsilon * eta) * I;
      }
    }
  };

  SolveReport report;
  std::vector<double> f_new(static_cast<std::size_t>(slices));
  for (int it = 1; it <= opts.max_iter; ++it) {
    report.iterations = it;
    run_iterate(f);
    coupled_f(f_new);
    double res = 0.0;
    for (int k = 0; k < slices; ++k)
      res = std::max(res, std::abs(f_new[static_cast<std::size_t>(k)] -
                                   f[static_cast<std::size_t>(k)]));
    report.residual_history.push_back(res);
    if (res <= opts.tol) {
      report.converged = true;
      f = f_new;
      break;
    }
    for (int k = 0; k < slices; ++k)
      f[static_cast<std::size_t>(k)] +=
          opts.damping * (f_new[static_cast<std::size_t>(k)] -
                          f[static_cast<std::size_t>(k)]);
  }

  // Last Picard iterate, kept to certify that another iteration would not
  // move the solution in energy.
  const ScalarField q_last = q;
  const ScalarField m_last = m;

  run_iterate(f);
  coupled_f(f_new);
  path.f = f_new;
  for (int k = 0; k < slices; ++k) {
    const TimeSlice uxk(grid, std::vector<double>(ux.row(k).begin(),
                                                  ux.row(k).end()));
    const TimeSlice mk(grid, std::vector<double>(m.row(k).begin(),
                                                 m.row(k).end()));
    path.p_bar[static_cast<std::size_t>(k)] =
        dirichlet ? market_price_dirichlet(uxk, mk, params.epsilon)
                  : market_price(uxk, mk, params);
    const double fk = f_new[static_cast<std::size_t>(k)];
    auto qk = q.row(k);
    const auto uxrow = ux.row(k);
    for (int i = 0; i <= grid.nx; ++i) qk[i] = 0.5 * (fk - uxrow[i]);
  }

  // ---- invariant measurements ----
  const double mass0 = trapezoid(m.row(0), dx);
  if (!dirichlet) {
    for (int k = 0; k <= grid.nt; ++k)
      report.mass_error_max = std::max(
          report.mass_error_max, std::abs(trapezoid(m.row(k), dx) - mass0));
  } else {
    double prev = mass0;
    for (int k = 1; k <= grid.nt; ++k) {
      const double cur = trapezoid(m.row(k), dx);
      report.mass_error_max = std::max(report.mass_error_max, cur - prev);
      prev = cur;
    }
    report.mass_error_max = std::max(report.mass_error_max, 0.0);
  }
  report.mass_conserved = report.mass_error_max <= 1e-12;

  report.u_min = *std::min_element(u.data.begin(), u.data.end());
  report.u_nonnegative = report.u_min >= -1e-8;

  const double terminal_slope = max_abs(derivative(u_T).v);
  report.grad_bound_value = std::exp(params.r * grid.T) * terminal_slope;
  report.max_abs_ux = max_abs(ux.data);
  if (report.grad_bound_value > 0.0) {
    report.grad_bound_ratio = report.max_abs_ux / report.grad_bound_value;
    report.gradient_bound = report.grad_bound_ratio <= 1.05;
  } else {
    report.grad_bound_ratio =
        report.max_abs_ux == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    report.gradient_bound = report.max_abs_ux == 0.0;
  }

  const double coef = dirichlet ? params.epsilon : 2.0 * params.c_bar;
  const EnergyGapTerms gap =
      detail::energy_gap_fields(q_last, m_last, q, m, params.r, coef, grid);
  report.energy_gap_term1 = gap.term1;
  report.energy_gap_term2 = gap.term2;
  report.energy_gap_zero = gap.term1 <= 1e-6 && gap.term2 <= 1e-6;

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  MfgSolution sol{std::move(u), std::move(m), std::move(q), std::move(path),
                  std::move(report)};
  if (!sol.report.converged)
    throw NoConvergenceError("solve_mfg: drift path did not converge within "
                             "max_iter",
                             std::move(sol));
  return sol;
}

struct SystemResiduals {
  double hjb = 0.0;
  double fp_weak = 0.0;
};

// Pointwise backward-equation residual plus the worst forward weak-form
// residual over the duality battery.  Both shrink at first order under
// simultaneous (dx, dt) refinement.
inline SystemResiduals system_residuals(const MfgSolution& sol,
                                        const MarketParams& params,
                                        const Grid& grid) {
  SystemResiduals out;
  out.hjb = hjb_residual(sol.u, sol.path, params, grid);
  for (const auto& phi : duality_battery(grid))
    out.fp_weak = std::max(out.fp_weak,
                           fp_weak_residual(sol.m, sol.q, params, grid, phi));
  return out;
}

}  // namespace mfg1d
