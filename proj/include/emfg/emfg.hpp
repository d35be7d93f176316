#pragma once

#include "emfg/analytic.hpp"
#include "emfg/app.hpp"
#include "emfg/diagnostics.hpp"
#include "emfg/ensemble.hpp"
#include "emfg/error.hpp"
#include "emfg/fields.hpp"
#include "emfg/flow.hpp"
#include "emfg/grid.hpp"
#include "emfg/hamiltonian.hpp"
#include "emfg/hjb.hpp"
#include "emfg/io.hpp"
#include "emfg/mfg.hpp"
#include "emfg/problem.hpp"
#include "emfg/velocity.hpp"
