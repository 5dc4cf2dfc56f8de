#pragma once

#include "ulamcert/bounds.hpp"
#include "ulamcert/error.hpp"
#include "ulamcert/expr.hpp"
#include "ulamcert/gronwall.hpp"
#include "ulamcert/interval.hpp"
#include "ulamcert/ode.hpp"
#include "ulamcert/parallel.hpp"
#include "ulamcert/pde.hpp"
#include "ulamcert/perturb.hpp"
#include "ulamcert/problem_file.hpp"

