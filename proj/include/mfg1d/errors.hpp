#pragma once

#include <stdexcept>
#include <string>

namespace mfg1d {

// Failure conditions surfaced by the library.  A closed enum (rather than
// string matching on what()) so tests and the CLI exit-code mapping can
// dispatch on the reason.
enum class ErrorKind {
  invalid_parameter,      // out-of-range scalar input
  grid_too_small,         // operation needs more nodes than the grid has
  grid_mismatch,          // operands live on different grids
  negative_density,       // density input below the tolerated rounding dip
  negative_initial_data,  // m0 with negative entries
  mass_mismatch,          // masses disagree beyond tolerance
  invalid_data,           // sign/compatibility violation in problem data
  infeasible_pair,        // control pair outside the feasibility class
  cfl_violation,          // explicit step too large for the drift
  newton_divergence,      // implicit step's Newton loop failed
  no_convergence,         // fixed-point iteration exhausted max_iter
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace mfg1d
