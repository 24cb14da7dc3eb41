#pragma once

// Umbrella header: variable clustering, selection and classification for
// mixed numeric/categorical data.

#include "covsurf/archive.hpp"
#include "covsurf/clustering.hpp"
#include "covsurf/forest.hpp"
#include "covsurf/mixed_data.hpp"
#include "covsurf/parallel.hpp"
#include "covsurf/pcamix.hpp"
#include "covsurf/pipeline.hpp"
#include "covsurf/rng.hpp"
#include "covsurf/simulation.hpp"
#include "covsurf/vsurf.hpp"
