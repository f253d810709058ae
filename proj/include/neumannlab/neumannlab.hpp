#pragma once

#include "neumannlab/error.hpp"
#include "neumannlab/spectrum.hpp"
#include "neumannlab/nonlinearity.hpp"
#include "neumannlab/functional.hpp"
#include "neumannlab/energy.hpp"
#include "neumannlab/morse.hpp"
#include "neumannlab/parallel.hpp"
#include "neumannlab/solvers.hpp"
#include "neumannlab/reduction.hpp"
#include "neumannlab/ledger.hpp"
#include "neumannlab/config.hpp"
#include "neumannlab/pipeline.hpp"
