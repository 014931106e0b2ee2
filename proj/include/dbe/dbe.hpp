#pragma once

#include "dbe/grid.hpp"
#include "dbe/cyclic_tridiagonal.hpp"
#include "dbe/solver.hpp"
#include "dbe/functionals.hpp"
#include "dbe/bakry_emery.hpp"
#include "dbe/inequality_lab.hpp"
#include "dbe/experiments.hpp"
