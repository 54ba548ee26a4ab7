#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "grid.hpp"

namespace mfg1d {

// Model constants for the competing-producers market.  b, c aggregate the
// substitutability parameter epsilon into the drift coupling
//   f(t) = b + c * integral(u_x m),
// and b_bar, c_bar are the same data in the normalization used by the cost
// functional.  b_bar = 1 and c_bar = epsilon/2 hold identically, so they are
// assigned in closed form rather than recomputed through b/(1-c); this keeps
// the variational identities exact to the last bit.
struct MarketParams {
  double epsilon = 0.0;
  double r = 0.0;
  double sigma = 0.0;
  double T = 0.0;
  double L = 0.0;
  double b = 0.0;
  double c = 0.0;
  double b_bar = 0.0;
  double c_bar = 0.0;
};

inline MarketParams derive_params(double epsilon, double r, double sigma,
                                  double T, double L) {
  if (!(epsilon >= 0.0) || !(r >= 0.0) || !(sigma >= 0.0) || !(sigma <= 1.0) ||
      !(T > 0.0) || !(L > 0.0))
    fail(ErrorKind::invalid_parameter,
         "derive_params: require epsilon >= 0, r >= 0, sigma in [0,1], "
         "T > 0, L > 0");
  MarketParams p;
  p.epsilon = epsilon;
  p.r = r;
  p.sigma = sigma;
  p.T = T;
  p.L = L;
  p.b = 2.0 / (2.0 + epsilon);
  p.c = epsilon / (2.0 + epsilon);
  p.b_bar = 1.0;
  p.c_bar = 0.5 * epsilon;
  return p;
}

// Which wall conditions the solvers impose.  NeumannReflection reflects at
// both walls and conserves mass; DirichletLeft absorbs at x = 0 (exhausted
// producers drop out) and reflects at x = L.
enum class BoundarySpec { NeumannReflection, DirichletLeft };

// Scalar market history along the run: the drift coefficient f(t) and the
// average quoted price p_bar(t), one value per time node.
struct MarketPath {
  Grid grid;
  std::vector<double> f;
  std::vector<double> p_bar;

  MarketPath() = default;
  explicit MarketPath(const Grid& g, double f_fill = 0.0)
      : grid(g),
        f(static_cast<std::size_t>(g.slices()), f_fill),
        p_bar(static_cast<std::size_t>(g.slices()), 0.0) {}
};

// ---- static market relations ----------------------------------------------

// Demand faced by a producer quoting p when the average quote is p_bar.
inline double demand(double p, double p_bar, double epsilon) {
  return 1.0 / (1.0 + epsilon) - p + epsilon * p_bar / (1.0 + epsilon);
}

// Best-response quote of a producer whose marginal value of reserves is u_x.
inline double equilibrium_price(double u_x, double p_bar, double epsilon) {
  return 0.5 * (1.0 / (1.0 + epsilon) + epsilon * p_bar / (1.0 + epsilon) + u_x);
}

// Demand served at the best-response quote; equals p* - u_x.
inline double equilibrium_demand(double u_x, double p_bar, double epsilon) {
  return 0.5 * (1.0 / (1.0 + epsilon) + epsilon * p_bar / (1.0 + epsilon) - u_x);
}

// Clearing value of the average price: substituting p_bar back into the
// best-response map reproduces it in the mean.
inline double market_price(const TimeSlice& u_x, const TimeSlice& m,
                           const MarketParams& params) {
  if (!(u_x.grid == m.grid))
    fail(ErrorKind::grid_mismatch, "market_price: grids differ");
  const double I = trapezoid_product(u_x.v, m.v, m.grid.dx());
  return 1.0 / (2.0 + params.epsilon) +
         (1.0 + params.epsilon) / (2.0 + params.epsilon) * I;
}

// Clearing average price when the population mass eta = integral(m) may be
// below one (producers that hit x = 0 have left the game).  At eta = 1 this
// reduces to market_price.
inline double market_price_dirichlet(const TimeSlice& u_x, const TimeSlice& m,
                                     double epsilon) {
  if (!(u_x.grid == m.grid))
    fail(ErrorKind::grid_mismatch, "market_price_dirichlet: grids differ");
  const double eta = trapezoid(m);
  const double I = trapezoid_product(u_x.v, m.v, m.grid.dx());
  return (2.0 - eta) / (2.0 + epsilon * eta) +
         (1.0 + epsilon) / (2.0 + epsilon * eta) * I;
}

// Scalar drift coefficient f = b + c * integral(u_x m).
inline double coupling_f(const TimeSlice& u_x, const TimeSlice& m,
                         const MarketParams& params) {
  if (!(u_x.grid == m.grid))
    fail(ErrorKind::grid_mismatch, "coupling_f: grids differ");
  return params.b + params.c * trapezoid_product(u_x.v, m.v, m.grid.dx());
}

// Dirichlet-variant drift coefficient: the coupling sees the surviving mass
// eta = integral(m) in place of the fixed unit population.
inline double coupling_f_dirichlet(const TimeSlice& u_x, const TimeSlice& m,
                                   double epsilon) {
  if (!(u_x.grid == m.grid))
    fail(ErrorKind::grid_mismatch, "coupling_f_dirichlet: grids differ");
  const double eta = trapezoid(m);
  const double I = trapezoid_product(u_x.v, m.v, m.grid.dx());
  return 2.0 / (2.0 + epsilon * eta) + epsilon / (2.0 + epsilon * eta) * I;
}

// Equilibrium production rate G_i = (f - u_x,i)/2 at every node.  This is
// the drift of the population dynamics and the demand served in equilibrium.
// Requires a unit-mass density (the coupling formula assumes the full
// population is present); pass the Dirichlet variant below otherwise.
inline TimeSlice coupling_G(const TimeSlice& u_x, const TimeSlice& m,
                            const MarketParams& params,
                            double* f_out = nullptr) {
  if (!(u_x.grid == m.grid))
    fail(ErrorKind::grid_mismatch, "coupling_G: grids differ");
  if (std::abs(trapezoid(m) - 1.0) > 1e-6)
    fail(ErrorKind::mass_mismatch, "coupling_G: density mass not 1 within 1e-6");
  const double f = coupling_f(u_x, m, params);
  if (f_out) *f_out = f;
  TimeSlice G(u_x.grid);
  for (std::size_t i = 0; i < G.v.size(); ++i)
    G.v[i] = 0.5 * (f - u_x.v[i]);
  return G;
}

inline TimeSlice coupling_G_dirichlet(const TimeSlice& u_x, const TimeSlice& m,
                                      double epsilon,
                                      double* f_out = nullptr) {
  if (!(u_x.grid == m.grid))
    fail(ErrorKind::grid_mismatch, "coupling_G_dirichlet: grids differ");
  const double f = coupling_f_dirichlet(u_x, m, epsilon);
  if (f_out) *f_out = f;
  TimeSlice G(u_x.grid);
  for (std::size_t i = 0; i < G.v.size(); ++i)
    G.v[i] = 0.5 * (f - u_x.v[i]);
  return G;
}

}  // namespace mfg1d
