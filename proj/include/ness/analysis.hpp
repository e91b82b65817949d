#pragma once

#include "ness/analysis/green_kubo.hpp"
#include "ness/analysis/large_deviations.hpp"
#include "ness/analysis/probes.hpp"
#include "ness/analysis/reduction.hpp"
#include "ness/analysis/steady_state.hpp"
