#pragma once

#include "error.hpp"
#include "featureio.hpp"
#include "gluecap.hpp"
#include "linalg.hpp"
#include "markers.hpp"
#include "nnls.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"
#include "probe.hpp"
#include "prognostics.hpp"
#include "projoracle.hpp"
#include "rng.hpp"
