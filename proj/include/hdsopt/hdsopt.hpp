#pragma once

#include "hdsopt/bench.hpp"
#include "hdsopt/errors.hpp"
#include "hdsopt/fdt.hpp"
#include "hdsopt/gp.hpp"
#include "hdsopt/gpt.hpp"
#include "hdsopt/gpucb.hpp"
#include "hdsopt/harness.hpp"
#include "hdsopt/hds.hpp"
#include "hdsopt/rng.hpp"
#include "hdsopt/stats.hpp"
