#pragma once

/// Umbrella header for the road-field library.

#include "analysis.hpp"
#include "cli_io.hpp"
#include "core_model.hpp"
#include "dynamics.hpp"
#include "eigensolve.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "parallel.hpp"
