#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <utility>
#include <vector>

#include "fixed_point.hpp"
#include "grid.hpp"
#include "market.hpp"
#include "test_functions.hpp"

namespace mfg1d {

// Vanishing-viscosity study driver.  The lemmas behind these diagnostics
// bound each quantity by a constant that does not depend on sigma but is
// never made explicit, so the meaningful check is uniformity across the
// sweep (each curve staying within a small factor of itself), not an
// absolute threshold.

struct SweepOptions {
  FixedPointOptions fixed_point;
  bool parallel = false;     // fan the per-sigma solves out over threads
  unsigned seed = 12345;     // Hoelder pair sampler
};

struct SweepResult {
  std::vector<double> sigmas;
  std::vector<MfgSolution> solutions;
  std::vector<bool> converged;

  // Consecutive-entry distances (length n-1): sup over time nodes of the
  // 1-Wasserstein distance between densities, and sup difference of the
  // drift paths.
  std::vector<double> d1_consecutive;
  std::vector<double> f_sup_diffs;

  // Per-entry diagnostics (length n).
  std::vector<double> holder_d1;
  std::vector<double> holder_u;
  std::vector<double> ut_l2;
  std::vector<double> sigma2_uxx_l2;
  std::vector<double> fisher_like;
};

// Discrete L2 norm of the forward time-difference quotient over the whole
// space-time cylinder.
inline double ut_l2_norm(const ScalarField& u, const Grid& grid) {
  if (!(u.grid == grid)) fail(ErrorKind::grid_mismatch, "ut_l2_norm: wrong grid");
  const double dx = grid.dx();
  const double dt = grid.dt();
  std::vector<double> row(static_cast<std::size_t>(grid.nodes()));
  double acc = 0.0;
  for (int k = 0; k < grid.nt; ++k) {
    const auto cur = u.row(k);
    const auto next = u.row(k + 1);
    for (int i = 0; i <= grid.nx; ++i) {
      const double d = (next[i] - cur[i]) / dt;
      row[i] = d * d;
    }
    acc += dt * trapezoid(row, dx);
  }
  return std::sqrt(acc);
}

// sigma^2 times the L2 norm of the discrete second derivative, with the
// reflection-ghost form at the walls (the same operator the solver applies).
inline double sigma2_uxx_l2_norm(const ScalarField& u,
                                 const MarketParams& params, const Grid& grid) {
  if (!(u.grid == grid))
    fail(ErrorKind::grid_mismatch, "sigma2_uxx_l2_norm: wrong grid");
  const double dx = grid.dx();
  const double dt = grid.dt();
  std::vector<double> row(static_cast<std::size_t>(grid.nodes()));
  double acc = 0.0;
  for (int k = 0; k <= grid.nt; ++k) {
    const auto uk = u.row(k);
    for (int i = 0; i <= grid.nx; ++i) {
      const double up = i < grid.nx ? uk[i + 1] : uk[i - 1];
      const double dn = i > 0 ? uk[i - 1] : uk[i + 1];
      const double uxx = (up - 2.0 * uk[i] + dn) / (dx * dx);
      row[i] = uxx * uxx;
    }
    const double wk = (k == 0 || k == grid.nt) ? 0.5 * dt : dt;
    acc += wk * trapezoid(row, dx);
  }
  return params.sigma * params.sigma * std::sqrt(acc);
}

// sigma^2 (integral of m_x^2/(m+1))^{1/2}: a tamed Fisher-information-style
// norm whose uniform boundedness expresses that diffusion does not create
// unbounded density oscillation as it vanishes.
inline double fisher_like_norm(const ScalarField& m, const MarketParams& params,
                               const Grid& grid) {
  if (!(m.grid == grid))
    fail(ErrorKind::grid_mismatch, "fisher_like_norm: wrong grid");
  const double dx = grid.dx();
  const double dt = grid.dt();
  std::vector<double> mx(static_cast<std::size_t>(grid.nodes()));
  std::vector<double> row(static_cast<std::size_t>(grid.nodes()));
  double acc = 0.0;
  for (int k = 0; k <= grid.nt; ++k) {
    const auto mk = m.row(k);
    derivative_into(mk, mx, dx);
    for (int i = 0; i <= grid.nx; ++i) row[i] = mx[i] * mx[i] / (mk[i] + 1.0);
    const double wk = (k == 0 || k == grid.nt) ? 0.5 * dt : dt;
    acc += wk * trapezoid(row, dx);
  }
  return params.sigma * params.sigma * std::sqrt(acc);
}

namespace detail {

// Time pairs for the Hoelder quotients: every adjacent pair, the full-range
// pair (so a linear-in-time field realizes its exact quotient), and a fixed
// budget of seeded random pairs.
inline std::vector<std::pair<int, int>> holder_pairs(int nt, unsigned seed,
                                                     int samples = 1000) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(nt + samples + 1));
  for (int k = 0; k < nt; ++k) pairs.emplace_back(k, k + 1);
  pairs.emplace_back(0, nt);
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> node(0, nt);
  for (int s = 0; s < samples; ++s) {
    const int a = node(rng);
    const int b = node(rng);
    if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  return pairs;
}

}  // namespace detail

// max over sampled (t1, t2, x) of |u(t1,x) - u(t2,x)| / |t1 - t2|^{1/3}.
inline double holder_time_quotient_u(const ScalarField& u, const Grid& grid,
                                     unsigned seed = 12345) {
  if (!(u.grid == grid))
    fail(ErrorKind::grid_mismatch, "holder_time_quotient_u: wrong grid");
  double worst = 0.0;
  for (const auto& [a, b] : detail::holder_pairs(grid.nt, seed)) {
    const double denom = std::cbrt(grid.t(b) - grid.t(a));
    const double diff = sup_diff(u.row(a), u.row(b));
    worst = std::max(worst, diff / denom);
  }
  return worst;
}

// max over sampled time pairs of d1(m(t1), m(t2)) / |t1 - t2|^{1/2}.
inline double holder_d1_quotient(const ScalarField& m, const Grid& grid,
                                 unsigned seed = 12345) {
  if (!(m.grid == grid))
    fail(ErrorKind::grid_mismatch, "holder_d1_quotient: wrong grid");
  double worst = 0.0;
  for (const auto& [a, b] : detail::holder_pairs(grid.nt, seed)) {
    const double denom = std::sqrt(grid.t(b) - grid.t(a));
    const double d1 = wasserstein1(m.slice(a), m.slice(b));
    worst = std::max(worst, d1 / denom);
  }
  return worst;
}

// Moduli of continuity of the drift path at lags of 1, 2, 4, 8 time steps.
inline std::vector<double> f_equicontinuity_modulus(const MarketPath& path,
                                                    const Grid& grid) {
  if (!(path.grid == grid))
    fail(ErrorKind::grid_mismatch, "f_equicontinuity_modulus: wrong grid");
  std::vector<double> omega;
  for (int lag : {1, 2, 4, 8}) {
    double w = 0.0;
    for (int k = 0; k + lag <= grid.nt; ++k)
      w = std::max(w, std::abs(path.f[static_cast<std::size_t>(k + lag)] -
                               path.f[static_cast<std::size_t>(k)]));
    omega.push_back(w);
  }
  return omega;
}

// Worst weak-form value over the nonnegative battery.  A classical solution
// gives ~0 (quadrature error); the vanishing-viscosity limit must stay <= 0
// up to discretization slack, never significantly positive.
inline double viscosity_subsolution_check(const ScalarField& u,
                                          const MarketPath& path,
                                          const MarketParams& params,
                                          const Grid& grid) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& phi : subsolution_battery(grid))
    worst = std::max(worst, subsolution_weak_form(u, path, params, grid, phi));
  return worst;
}

// Solve the system along a decreasing sigma sequence and fill the
// compactness diagnostics.  A non-converged entry is flagged, its partial
// solution recorded, and the sweep keeps going -- a sweep exists to show a
// trend, and one bad entry should not erase the rest.
inline SweepResult sigma_sweep(const MarketParams& params_base,
                               const std::vector<double>& sigmas,
                               const TimeSlice& m0, const TimeSlice& u_T,
                               const Grid& grid, const SweepOptions& opts = {}) {
  if (sigmas.empty())
    fail(ErrorKind::invalid_parameter, "sigma_sweep: empty sigma list");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const bool last = i + 1 == sigmas.size();
    if (!(sigmas[i] >= 0.0) || !(sigmas[i] <= 1.0) ||
        (sigmas[i] == 0.0 && !last))
      fail(ErrorKind::invalid_parameter,
           "sigma_sweep: sigmas must lie in (0,1] with 0 allowed last");
    if (!last && !(sigmas[i] > sigmas[i + 1]))
      fail(ErrorKind::invalid_parameter,
           "sigma_sweep: sigmas must be strictly decreasing");
  }

  SweepResult out;
  out.sigmas = sigmas;
  const std::size_t n = sigmas.size();
  out.solutions.resize(n);
  out.converged.assign(n, false);

  struct Entry {
    MfgSolution sol;
    bool ok = false;
  };
  auto solve_one = [&](double sigma) -> Entry {
    const MarketParams params = derive_params(
        params_base.epsilon, params_base.r, sigma, params_base.T, params_base.L);
    try {
      return {solve_mfg(m0, u_T, params, grid, BoundarySpec::NeumannReflection,
                        opts.fixed_point),
              true};
    } catch (const NoConvergenceError& e) {
      return {e.partial(), false};
    }
  };

  if (opts.parallel && n > 1) {
    std::vector<std::future<Entry>> futures;
    futures.reserve(n);
    for (double s : sigmas)
      futures.push_back(std::async(std::launch::async, solve_one, s));
    for (std::size_t i = 0; i < n; ++i) {
      Entry e = futures[i].get();
      out.solutions[i] = std::move(e.sol);
      out.converged[i] = e.ok;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      Entry e = solve_one(sigmas[i]);
      out.solutions[i] = std::move(e.sol);
      out.converged[i] = e.ok;
    }
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    double d1 = 0.0;
    for (int k = 0; k <= grid.nt; ++k)
      d1 = std::max(d1, wasserstein1(out.solutions[i].m.slice(k),
                                     out.solutions[i + 1].m.slice(k)));
    out.d1_consecutive.push_back(d1);
    out.f_sup_diffs.push_back(
        sup_diff(out.solutions[i].path.f, out.solutions[i + 1].path.f));
  }

  for (std::size_t i = 0; i < n; ++i) {
    const MarketParams params = derive_params(params_base.epsilon, params_base.r,
                                              sigmas[i], params_base.T,
                                              params_base.L);
    const MfgSolution& sol = out.solutions[i];
    out.holder_d1.push_back(holder_d1_quotient(sol.m, grid, opts.seed));
    out.holder_u.push_back(holder_time_quotient_u(sol.u, grid, opts.seed));
    out.ut_l2.push_back(ut_l2_norm(sol.u, grid));
    out.sigma2_uxx_l2.push_back(sigma2_uxx_l2_norm(sol.u, params, grid));
    out.fisher_like.push_back(fisher_like_norm(sol.m, params, grid));
  }
  return out;
}

}  // namespace mfg1d
