#pragma once

#include <cstddef>
#include <span>

#include "errors.hpp"

namespace mfg1d {

// Thomas algorithm for a tridiagonal system.  sub[0] and sup[n-1] are
// ignored.  No pivoting: callers supply diagonally dominant M-matrix
// systems, for which the sweep is stable.  With sub, sup <= 0 and rhs >= 0
// every intermediate quantity below is a sum of nonnegative terms, so the
// solution of such a system is nonnegative exactly, not merely up to
// rounding -- the Fokker-Planck stepper relies on this.
//
// scratch must have the same length as rhs; x may alias rhs.
inline void thomas_solve(std::span<const double> sub,
                         std::span<const double> diag,
                         std::span<const double> sup,
                         std::span<const double> rhs, std::span<double> x,
                         std::span<double> scratch) {
  const std::size_t n = diag.size();
  if (n == 0 || sub.size() != n || sup.size() != n || rhs.size() != n ||
      x.size() != n || scratch.size() != n)
    fail(ErrorKind::grid_mismatch, "thomas_solve: inconsistent lengths");

  // Forward sweep: scratch holds the scaled superdiagonal, x the scaled rhs.
  double denom = diag[0];
  scratch[0] = sup[0] / denom;
  x[0] = rhs[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - sub[i] * scratch[i - 1];
    scratch[i] = sup[i] / denom;
    x[i] = (rhs[i] - sub[i] * x[i - 1]) / denom;
  }
  // Back substitution.
  for (std::size_t i = n - 1; i-- > 0;) x[i] = x[i] - scratch[i] * x[i + 1];
}

}  // namespace mfg1d
