#pragma once

// RC-GPS: regression-calibration corrected generalized propensity score
// analysis for categorical exposures derived from an error-prone continuous
// exposure. Umbrella header.

#include "rcgps/calibration.hpp"
#include "rcgps/csv.hpp"
#include "rcgps/diagnostics.hpp"
#include "rcgps/errors.hpp"
#include "rcgps/estimators.hpp"
#include "rcgps/gps.hpp"
#include "rcgps/outcome.hpp"
#include "rcgps/pipeline.hpp"
#include "rcgps/rng.hpp"
#include "rcgps/simulation.hpp"
#include "rcgps/tabular.hpp"
