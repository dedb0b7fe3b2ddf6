#pragma once

// Umbrella header for the StateNet dialogue state tracker library.

#include "statenet/array.hpp"
#include "statenet/checkpoint.hpp"
#include "statenet/corpus.hpp"
#include "statenet/embeddings.hpp"
#include "statenet/errors.hpp"
#include "statenet/evaluation.hpp"
#include "statenet/featurizer.hpp"
#include "statenet/graph.hpp"
#include "statenet/model.hpp"
#include "statenet/ops.hpp"
#include "statenet/optim.hpp"
#include "statenet/parameters.hpp"
#include "statenet/rng.hpp"
#include "statenet/text.hpp"
#include "statenet/training.hpp"

namespace statenet {

// Build-wide scalar precision for the shipped tools: single precision by
// default, double when STATENET_REAL_DOUBLE is defined. The library itself is
// templated, so both precisions are always available side by side (gradient
// checks, for instance, instantiate double).
#ifdef STATENET_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

} // namespace statenet
