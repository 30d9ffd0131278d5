#pragma once

#include "ghostlab/accumulators.hpp"
#include "ghostlab/analytics.hpp"
#include "ghostlab/combinatorics.hpp"
#include "ghostlab/core_model.hpp"
#include "ghostlab/csv.hpp"
#include "ghostlab/error.hpp"
#include "ghostlab/estimators.hpp"
#include "ghostlab/frame_io.hpp"
#include "ghostlab/imaging_run.hpp"
#include "ghostlab/parallel.hpp"
#include "ghostlab/rng.hpp"
#include "ghostlab/speckle.hpp"
