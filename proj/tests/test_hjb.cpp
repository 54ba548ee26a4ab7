#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfg1d/mfg1d.hpp"
#include "support.hpp"

using namespace mfg1d;
using mfg1d_test::expect_kind;

namespace {

// Spatially flat data turns the PDE into the scalar ODE
//   u' = r u - b^2/4  (backward from u(T) = K),
// solved by u(t) = K e^{-r (T-t)} + (b^2 / 4r) (1 - e^{-r (T-t)}).
double ode_value(double K, double b, double r, double T, double t) {
  if (r == 0.0) return K + 0.25 * b * b * (T - t);
  const double decay = std::exp(-r * (T - t));
  return K * decay + (b * b / (4.0 * r)) * (1.0 - decay);
}

double ode_sup_error(const ScalarField& u, double K, double b, double r) {
  double worst = 0.0;
  for (int k = 0; k <= u.grid.nt; ++k) {
    const double exact = ode_value(K, b, r, u.grid.T, u.grid.t(k));
    for (int i = 0; i <= u.grid.nx; ++i)
      worst = std::max(worst, std::abs(u.at(k, i) - exact));
  }
  return worst;
}

double row_flatness(const ScalarField& u) {
  double worst = 0.0;
  for (int k = 0; k <= u.grid.nt; ++k) {
    auto row = u.row(k);
    auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    worst = std::max(worst, *hi - *lo);
  }
  return worst;
}

}  // namespace

TEST(GodunovHamiltonian, ClosedFormCases) {
  // Equal one-sided slopes: plain H(p) = (f - p)^2 / 4.
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(0.0, 0.0, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(0.5, 0.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(2.0, 2.0, 1.0), 0.25);
  // Rarefaction-side gap (p_minus < f < p_plus): max of endpoint values.
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(0.0, 2.0, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(0.0, 3.0, 1.0), 1.0);
  // Shock-side overlap (p_plus < f < p_minus): minimum over the interval,
  // which contains the Hamiltonian's zero at p = f.
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(2.0, 0.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(godunov_hamiltonian(1.5, 0.5, 1.0), 0.0);
}

TEST(GodunovHamiltonian, MonotoneInBothSlopes) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    double pm = d(rng), pp = d(rng), f = d(rng), h = 0.05;
    // Nonincreasing in the backward slope, nondecreasing in the forward one.
    EXPECT_LE(godunov_hamiltonian(pm + h, pp, f),
              godunov_hamiltonian(pm, pp, f) + 1e-15);
    EXPECT_GE(godunov_hamiltonian(pm, pp + h, f),
              godunov_hamiltonian(pm, pp, f) - 1e-15);
  }
}

TEST(SolveHjb, ZeroDataStaysZero) {
  Grid g(50, 80, 1.0, 1.0);
  MarketParams params = derive_params(1.0, 0.5, 0.7, 1.0, 1.0);
  MarketPath path(g, 0.0);
  TimeSlice uT(g, 0.0);
  ScalarField u = solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection);
  for (double v : u.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(SolveHjb, FlatDataReducesToScalarOde) {
  // epsilon = 1 market constants, K = 0.5, f pinned at b.
  MarketParams params = derive_params(1.0, 0.5, 0.7, 1.0, 1.0);
  auto run = [&](int nx, int nt) {
    Grid g(nx, nt, 1.0, 1.0);
    MarketPath path(g, params.b);
    TimeSlice uT = constant_value(g, 0.5);
    ScalarField u =
        solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection);
    EXPECT_DOUBLE_EQ(row_flatness(u), 0.0);  // constants stay exactly constant
    return ode_sup_error(u, 0.5, params.b, params.r);
  };
  double coarse = run(50, 100);
  double fine = run(50, 200);
  EXPECT_LE(coarse, 5.0 * (1.0 / 100.0));
  EXPECT_GE(coarse / fine, 1.8);  // first order in dt
  EXPECT_LE(coarse / fine, 2.2);

  // r = 0 variant: the march adds dt b^2/4 per step, so the linear-in-time
  // solution is reproduced to accumulated round-off.
  MarketParams p0 = derive_params(1.0, 0.0, 0.7, 1.0, 1.0);
  Grid g(40, 200, 1.0, 1.0);
  MarketPath path(g, p0.b);
  TimeSlice uT = constant_value(g, 0.5);
  ScalarField u = solve_hjb(path, uT, p0, g, BoundarySpec::NeumannReflection);
  double worst = 0.0;
  for (int k = 0; k <= g.nt; ++k)
    worst = std::max(worst, std::abs(u.at(k, 0) - ode_value(0.5, p0.b, 0.0,
                                                            g.T, g.t(k))));
  EXPECT_LE(worst, 1e-12);
}

TEST(SolveHjb, ConstantModeExactUnderVaryingDrift) {
  // Even with a wandering f(t) the solution of flat terminal data must stay
  // spatially flat to the last bit (the implicit solve splits the constant
  // mode off analytically).  This is what makes the zero-gradient bound
  // checkable as an exact equality downstream.
  Grid g(60, 90, 1.0, 1.0);
  MarketParams params = derive_params(2.0, 0.5, 1.0, 1.0, 1.0);
  MarketPath path(g);
  for (int k = 0; k <= g.nt; ++k)
    path.f[k] = 0.5 + 0.2 * std::sin(5.0 * g.t(k));
  TimeSlice uT = constant_value(g, 0.5);
  for (auto scheme : {HjbOptions::Scheme::semi_implicit,
                      HjbOptions::Scheme::fully_implicit_newton}) {
    HjbOptions opts;
    opts.scheme = scheme;
    ScalarField u =
        solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection, opts);
    EXPECT_DOUBLE_EQ(row_flatness(u), 0.0);
  }
  // sigma = 0 explicit march preserves constants exactly as well.
  MarketParams p0 = derive_params(2.0, 0.5, 0.0, 1.0, 1.0);
  Grid fine(60, 900, 1.0, 1.0);
  MarketPath pathf(fine);
  for (int k = 0; k <= fine.nt; ++k)
    pathf.f[k] = 0.5 + 0.2 * std::sin(5.0 * fine.t(k));
  TimeSlice uTf = constant_value(fine, 0.5);
  ScalarField u0 =
      solve_hjb(pathf, uTf, p0, fine, BoundarySpec::NeumannReflection);
  EXPECT_DOUBLE_EQ(row_flatness(u0), 0.0);
}

TEST(SolveHjb, PreservesNonnegativityAndGradientBound) {
  Grid g(100, 200, 1.0, 1.0);
  MarketParams params = derive_params(1.0, 0.5, 0.5, 1.0, 1.0);
  MarketPath path(g);
  for (int k = 0; k <= g.nt; ++k)
    path.f[k] = params.b + 0.1 * std::cos(3.0 * g.t(k));
  double slope = 0.3;
  TimeSlice uT = ramp_value(g, slope);
  ScalarField u = solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection);

  double u_min = u.data[0];
  for (double v : u.data) u_min = std::min(u_min, v);
  EXPECT_GE(u_min, -1e-12);

  // Comparison-principle bound: slopes can only grow by the discount factor.
  double max_slope = 0.0;
  for (int k = 0; k <= g.nt; ++k) {
    TimeSlice du = derivative(u.slice(k));
    max_slope = std::max(max_slope, max_abs(du.v));
  }
  TimeSlice duT = derivative(uT);
  EXPECT_LE(max_slope, std::exp(params.r * g.T) * max_abs(duT.v) * 1.05);
}

TEST(SolveHjb, NewtonAgreesWithSemiImplicit) {
  Grid g(100, 200, 1.0, 1.0);
  MarketParams params = derive_params(1.0, 0.5, 0.5, 1.0, 1.0);
  MarketPath path(g, params.b);
  TimeSlice uT = ramp_value(g, 0.3);
  HjbOptions newton;
  newton.scheme = HjbOptions::Scheme::fully_implicit_newton;
  ScalarField ua =
      solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection);
  ScalarField ub =
      solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection, newton);
  // Same PDE, schemes differ in where the Hamiltonian is evaluated: the gap
  // is one order in dt smaller than the solution scale.
  double gap = 0.0;
  for (std::size_t j = 0; j < ua.data.size(); ++j)
    gap = std::max(gap, std::abs(ua.data[j] - ub.data[j]));
  EXPECT_LE(gap, 5.0 * g.dt());
  EXPECT_GT(gap, 0.0);  // they are genuinely different discretizations

  // Both produce small pointwise equation residuals.
  EXPECT_LE(hjb_residual(ua, path, params, g), 0.2);
  EXPECT_LE(hjb_residual(ub, path, params, g), 0.2);
}

TEST(SolveHjb, ExplicitMarchWhenSigmaZero) {
  MarketParams params = derive_params(1.0, 0.5, 0.0, 1.0, 1.0);
  Grid g(100, 400, 1.0, 1.0);
  MarketPath path(g, params.b);
  TimeSlice uT = ramp_value(g, 0.3);
  // Scheme option is irrelevant at sigma = 0: both route to the explicit
  // monotone march and agree bitwise.
  HjbOptions newton;
  newton.scheme = HjbOptions::Scheme::fully_implicit_newton;
  ScalarField ua =
      solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection);
  ScalarField ub =
      solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection, newton);
  for (std::size_t j = 0; j < ua.data.size(); ++j)
    EXPECT_DOUBLE_EQ(ua.data[j], ub.data[j]);
  double u_min = ua.data[0];
  for (double v : ua.data) u_min = std::min(u_min, v);
  EXPECT_GE(u_min, 0.0);

  // Coarse time grid breaks the CFL bound dt <= dx / max|f - u_x|.
  Grid coarse(100, 10, 1.0, 1.0);
  MarketPath cpath(coarse, params.b);
  TimeSlice cuT = ramp_value(coarse, 0.3);
  expect_kind(ErrorKind::cfl_violation,
              [&] {
                solve_hjb(cpath, cuT, params, coarse,
                          BoundarySpec::NeumannReflection);
              },
              "dt = 0.1 vs dx = 0.01");
}

TEST(SolveHjb, DirichletWallStaysPinned) {
  Grid g(80, 160, 1.0, 1.0);
  TimeSlice uT = ramp_value(g, 0.3);  // uT(0) = 0, compatible with the pin
  for (double sigma : {0.7, 0.0}) {
    MarketParams params = derive_params(1.0, 0.5, sigma, 1.0, 1.0);
    Grid grid = sigma == 0.0 ? Grid(80, 400, 1.0, 1.0) : g;
    MarketPath path(grid, params.b);
    TimeSlice uTg = ramp_value(grid, 0.3);
    for (auto scheme : {HjbOptions::Scheme::semi_implicit,
                        HjbOptions::Scheme::fully_implicit_newton}) {
      HjbOptions opts;
      opts.scheme = scheme;
      ScalarField u =
          solve_hjb(path, uTg, params, grid, BoundarySpec::DirichletLeft, opts);
      for (int k = 0; k <= grid.nt; ++k)
        EXPECT_DOUBLE_EQ(u.at(k, 0), 0.0)
            << "sigma " << sigma << " k " << k;
      // Interior still evolves (value accrues away from the absorbed wall).
      EXPECT_GT(u.at(0, grid.nx / 2), 0.0);
    }
  }
}

TEST(SolveHjb, InputValidation) {
  Grid g(40, 40, 1.0, 1.0);
  Grid other(41, 40, 1.0, 1.0);
  MarketParams params = derive_params(1.0, 0.5, 0.5, 1.0, 1.0);
  MarketPath path(g, params.b);
  TimeSlice uT = constant_value(g, 0.5);

  expect_kind(ErrorKind::grid_mismatch,
              [&] {
                MarketPath wrong(other, params.b);
                solve_hjb(wrong, uT, params, g,
                          BoundarySpec::NeumannReflection);
              },
              "path grid mismatch");
  expect_kind(ErrorKind::grid_too_small,
              [&] {
                Grid tiny(1, 40, 1.0, 1.0);
                MarketPath p(tiny, params.b);
                TimeSlice v(tiny, 0.5);
                solve_hjb(p, v, params, tiny, BoundarySpec::NeumannReflection);
              },
              "nx = 1");
  expect_kind(ErrorKind::invalid_data,
              [&] {
                TimeSlice neg(g, 0.5);
                neg.v[3] = -0.1;
                solve_hjb(path, neg, params, g,
                          BoundarySpec::NeumannReflection);
              },
              "negative terminal payoff");
  expect_kind(ErrorKind::invalid_data,
              [&] {
                MarketPath bad(g, params.b);
                bad.f[5] = std::nan("");
                solve_hjb(bad, uT, params, g, BoundarySpec::NeumannReflection);
              },
              "NaN drift");
  expect_kind(ErrorKind::invalid_parameter,
              [&] {
                HjbOptions opts;
                opts.newton_max_iter = 0;
                solve_hjb(path, uT, params, g, BoundarySpec::NeumannReflection,
                          opts);
              },
              "zero Newton iterations");
}

TEST(HjbResidual, HandValues) {
  Grid g(50, 50, 1.0, 1.0);
  MarketParams params = derive_params(0.0, 1.0, 0.5, 1.0, 1.0);
  MarketPath zero_path(g, 0.0);

  // u identically zero, f = 0: every term vanishes.
  ScalarField z(g, FieldRole::value_function);
  EXPECT_DOUBLE_EQ(hjb_residual(z, zero_path, params, g), 0.0);

  // u identically one, f = 0, r = 1: residual = |-r u + (f/2)^2| = 1.
  ScalarField ones(g, FieldRole::value_function);
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  EXPECT_DOUBLE_EQ(hjb_residual(ones, zero_path, params, g), 1.0);

  // Flat-data case: the increment equation cancels the residual convention
  // identically, so only round-off remains.
  MarketParams mp = derive_params(1.0, 0.5, 0.7, 1.0, 1.0);
  {
    Grid grid(30, 100, 1.0, 1.0);
    MarketPath path(grid, mp.b);
    TimeSlice uT = constant_value(grid, 0.5);
    ScalarField u =
        solve_hjb(path, uT, mp, grid, BoundarySpec::NeumannReflection);
    EXPECT_LE(hjb_residual(u, path, mp, grid), 1e-12);
  }

  // Spatially varying data: residual is genuine first-order truncation and
  // halves when dt and dx halve together.
  auto residual_at = [&](int scale) {
    Grid grid(50 * scale, 100 * scale, 1.0, 1.0);
    MarketPath path(grid, mp.b);
    TimeSlice uT = ramp_value(grid, 0.3);
    ScalarField u =
        solve_hjb(path, uT, mp, grid, BoundarySpec::NeumannReflection);
    return hjb_residual(u, path, mp, grid);
  };
  double coarse = residual_at(1);
  double mid = residual_at(2);
  double fine = residual_at(4);
  EXPECT_LE(coarse, 0.01);
  EXPECT_GE(coarse / mid, 1.8);
  EXPECT_GE(mid / fine, 1.8);
}
