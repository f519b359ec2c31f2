#pragma once

// Umbrella header for the roughmag library: simulation and verification of
// physical Brownian motion in a magnetic field viewed as a rough path.

#include "roughmag/errors.hpp"
#include "roughmag/rng.hpp"
#include "roughmag/grid.hpp"
#include "roughmag/matops.hpp"
#include "roughmag/ousim.hpp"
#include "roughmag/roughpath.hpp"
#include "roughmag/signature.hpp"
#include "roughmag/rde.hpp"
#include "roughmag/stats.hpp"
#include "roughmag/parallel.hpp"
#include "roughmag/homogenize.hpp"
#include "roughmag/report.hpp"
