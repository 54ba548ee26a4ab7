#pragma once

// Umbrella header for the 1-D exhaustible-resource market MFG solver:
// backward value equation + forward population density, coupled through a
// scalar market drift path, with variational certification and a
// vanishing-viscosity study on top.

#include "errors.hpp"
#include "fixed_point.hpp"
#include "fokker_planck.hpp"
#include "grid.hpp"
#include "hjb.hpp"
#include "initial_data.hpp"
#include "market.hpp"
#include "test_functions.hpp"
#include "tridiagonal.hpp"
#include "variational.hpp"
#include "viscosity.hpp"
