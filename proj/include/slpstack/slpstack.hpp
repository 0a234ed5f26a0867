#pragma once

#include "slpstack/analytic.hpp"
#include "slpstack/distribution.hpp"
#include "slpstack/enumerate.hpp"
#include "slpstack/error.hpp"
#include "slpstack/experiment.hpp"
#include "slpstack/inference.hpp"
#include "slpstack/models.hpp"
#include "slpstack/numeric.hpp"
#include "slpstack/optimize.hpp"
#include "slpstack/partition.hpp"
#include "slpstack/program.hpp"
#include "slpstack/psis.hpp"
#include "slpstack/random.hpp"
#include "slpstack/report.hpp"
#include "slpstack/serialize.hpp"
#include "slpstack/simplex.hpp"
#include "slpstack/trace.hpp"
#include "slpstack/weighting.hpp"
