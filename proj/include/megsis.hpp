#ifndef MEGSIS_HPP
#define MEGSIS_HPP

#include "megsis/config.hpp"
#include "megsis/core.hpp"
#include "megsis/diagnostics.hpp"
#include "megsis/forward_model.hpp"
#include "megsis/gibbs.hpp"
#include "megsis/io.hpp"
#include "megsis/parallel.hpp"
#include "megsis/rng.hpp"
#include "megsis/scenario.hpp"
#include "megsis/sis.hpp"
#include "megsis/state_space.hpp"

#endif
