#pragma once

#include "errors.hpp"
#include "expr.hpp"
#include "eval.hpp"
#include "parse.hpp"
#include "poly.hpp"
#include "charts.hpp"
#include "determine.hpp"
#include "ode.hpp"
#include "specfun.hpp"
#include "dynamics.hpp"
#include "io.hpp"
