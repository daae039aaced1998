#pragma once

#include "nlflow/config.hpp"
#include "nlflow/curvature.hpp"
#include "nlflow/distance.hpp"
#include "nlflow/error.hpp"
#include "nlflow/flow.hpp"
#include "nlflow/frac_energy.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/io.hpp"
#include "nlflow/oracle.hpp"
#include "nlflow/osc_energy.hpp"
#include "nlflow/parallel.hpp"
#include "nlflow/rng.hpp"
#include "nlflow/rof_solver.hpp"
#include "nlflow/shapes.hpp"
#include "nlflow/validation.hpp"
