#pragma once

// Umbrella header.

#include "zeroone/bounds.hpp"
#include "zeroone/error.hpp"
#include "zeroone/events.hpp"
#include "zeroone/families/bc.hpp"
#include "zeroone/families/er.hpp"
#include "zeroone/families/percolation.hpp"
#include "zeroone/families/series.hpp"
#include "zeroone/probability.hpp"
#include "zeroone/rational.hpp"
#include "zeroone/rng.hpp"
#include "zeroone/verifier.hpp"
