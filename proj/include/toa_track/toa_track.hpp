#pragma once

#include "toa_track/core.hpp"
#include "toa_track/random.hpp"
#include "toa_track/geometry.hpp"
#include "toa_track/loss.hpp"
#include "toa_track/estimators.hpp"
#include "toa_track/analysis.hpp"
#include "toa_track/metrics.hpp"
#include "toa_track/harness/scenario.hpp"
#include "toa_track/harness/simulation.hpp"
#include "toa_track/harness/benchmark.hpp"
#include "toa_track/harness/emit.hpp"
