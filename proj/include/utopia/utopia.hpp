#pragma once

#include "utopia/aggregate.hpp"
#include "utopia/baselines.hpp"
#include "utopia/calibration.hpp"
#include "utopia/config.hpp"
#include "utopia/convex.hpp"
#include "utopia/csv.hpp"
#include "utopia/estimators.hpp"
#include "utopia/eval.hpp"
#include "utopia/features.hpp"
#include "utopia/lp.hpp"
#include "utopia/model.hpp"
#include "utopia/rng.hpp"
#include "utopia/synthetic.hpp"
#include "utopia/theory_oracle.hpp"
