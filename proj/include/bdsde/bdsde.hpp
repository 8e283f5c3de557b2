#pragma once

#include "bdsde/config.hpp"
#include "bdsde/csv.hpp"
#include "bdsde/diagnostics.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/fk_solver.hpp"
#include "bdsde/filter.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/model.hpp"
#include "bdsde/oracles.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/path.hpp"
#include "bdsde/quadrature.hpp"
#include "bdsde/rng.hpp"
#include "bdsde/version.hpp"
