#pragma once

#include "stlpde/errors.hpp"
#include "stlpde/util.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/system.hpp"
#include "stlpde/stl_parse.hpp"
#include "stlpde/semantics.hpp"
#include "stlpde/fem.hpp"
#include "stlpde/lp.hpp"
#include "stlpde/milp.hpp"
#include "stlpde/solve.hpp"
#include "stlpde/problem_io.hpp"
#include "stlpde/reasoning.hpp"
#include "stlpde/datagen.hpp"
#include "stlpde/metrics.hpp"
