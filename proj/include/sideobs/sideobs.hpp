#pragma once

#include "sideobs/errors.hpp"
#include "sideobs/linalg.hpp"
#include "sideobs/graph.hpp"
#include "sideobs/instance.hpp"
#include "sideobs/estimator.hpp"
#include "sideobs/spanner.hpp"
#include "sideobs/planner.hpp"
#include "sideobs/policies.hpp"
#include "sideobs/experiment.hpp"
#include "sideobs/serialization.hpp"
