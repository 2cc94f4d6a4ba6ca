#pragma once

// Umbrella header.

#include "bvdual/bregman.hpp"
#include "bvdual/central_moments.hpp"
#include "bvdual/decomposition.hpp"
#include "bvdual/ensembling.hpp"
#include "bvdual/error.hpp"
#include "bvdual/estimators.hpp"
#include "bvdual/experiment.hpp"
#include "bvdual/numeric.hpp"
#include "bvdual/parallel.hpp"
#include "bvdual/pool.hpp"
#include "bvdual/prediction_log.hpp"
#include "bvdual/prediction_set.hpp"
#include "bvdual/report.hpp"
#include "bvdual/rng.hpp"
#include "bvdual/toylab.hpp"
