#pragma once

// Variable selection for discriminant analysis with mixed continuous and binary variables.

#include "mixsel/classifier.hpp"
#include "mixsel/criterion.hpp"
#include "mixsel/data_model.hpp"
#include "mixsel/errors.hpp"
#include "mixsel/estimators.hpp"
#include "mixsel/parallel.hpp"
#include "mixsel/report.hpp"
#include "mixsel/scenario.hpp"
#include "mixsel/selection.hpp"
#include "mixsel/simulation.hpp"
#include "mixsel/tuning.hpp"
#include "mixsel/variable_set.hpp"
