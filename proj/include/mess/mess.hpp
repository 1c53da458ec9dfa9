#pragma once

#include "mess/calibration_cache.hpp"
#include "mess/confidence.hpp"
#include "mess/config.hpp"
#include "mess/cost_model.hpp"
#include "mess/error.hpp"
#include "mess/fixtures.hpp"
#include "mess/instance.hpp"
#include "mess/losses.hpp"
#include "mess/metrics.hpp"
#include "mess/profiling.hpp"
#include "mess/search.hpp"
#include "mess/simulate.hpp"
#include "mess/tensorio.hpp"
