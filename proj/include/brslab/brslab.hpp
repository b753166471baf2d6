#pragma once

#include "brslab/brscheck.hpp"
#include "brslab/compfun.hpp"
#include "brslab/examples.hpp"
#include "brslab/integrate.hpp"
#include "brslab/io.hpp"
#include "brslab/lyapunov.hpp"
#include "brslab/rng.hpp"
#include "brslab/semigroup.hpp"
#include "brslab/signal.hpp"
#include "brslab/system.hpp"
#include "brslab/tdinput.hpp"
