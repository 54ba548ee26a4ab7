#pragma once

#include <gtest/gtest.h>

#include <functional>

#include "mfg1d/mfg1d.hpp"

namespace mfg1d_test {

// Assert that a callable throws mfg1d::Error with the expected kind.
inline void expect_kind(mfg1d::ErrorKind kind, const std::function<void()>& fn,
                        const char* what) {
  try {
    fn();
  } catch (const mfg1d::Error& e) {
    EXPECT_EQ(static_cast<int>(e.kind()), static_cast<int>(kind))
        << what << ": wrong error kind, message: " << e.what();
    return;
  } catch (const std::exception& e) {
    ADD_FAILURE() << what << ": wrong exception type: " << e.what();
    return;
  }
  ADD_FAILURE() << what << ": expected a throw";
}

// Shared small corpus pieces.
inline mfg1d::Grid corpus_grid(int nx = 200, int nt = 400) {
  return mfg1d::Grid(nx, nt, 1.0, 1.0);
}

inline mfg1d::TimeSlice corpus_m0(const mfg1d::Grid& g) {
  return mfg1d::bump_density(g, 0.5, 0.2);
}

inline mfg1d::TimeSlice corpus_ramp(const mfg1d::Grid& g) {
  return mfg1d::ramp_value(g, 0.3);
}

}  // namespace mfg1d_test
