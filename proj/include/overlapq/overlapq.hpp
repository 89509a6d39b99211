#pragma once

#include "overlapq/analytic.hpp"
#include "overlapq/curve.hpp"
#include "overlapq/dist.hpp"
#include "overlapq/json_io.hpp"
#include "overlapq/kfold.hpp"
#include "overlapq/numerics.hpp"
#include "overlapq/parallel.hpp"
#include "overlapq/quadrature.hpp"
#include "overlapq/query.hpp"
#include "overlapq/rng.hpp"
#include "overlapq/sim.hpp"
#include "overlapq/validate.hpp"
