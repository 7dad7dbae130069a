#pragma once

#include "bellman/catalog.hpp"
#include "bellman/config.hpp"
#include "bellman/dbar.hpp"
#include "bellman/errors.hpp"
#include "bellman/flows.hpp"
#include "bellman/gaussian.hpp"
#include "bellman/general_rank.hpp"
#include "bellman/matrix_kernel.hpp"
#include "bellman/parallel.hpp"
#include "bellman/pde_conditions.hpp"
#include "bellman/quadrature.hpp"
#include "bellman/suite.hpp"
#include "bellman/verifiers.hpp"
