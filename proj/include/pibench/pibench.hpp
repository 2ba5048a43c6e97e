#pragma once

#include "pibench/types.hpp"
#include "pibench/rng.hpp"
#include "pibench/mdp.hpp"
#include "pibench/operators.hpp"
#include "pibench/garnet.hpp"
#include "pibench/approx_greedy.hpp"
#include "pibench/algorithms.hpp"
#include "pibench/concentrability.hpp"
#include "pibench/stats.hpp"
#include "pibench/svg.hpp"
#include "pibench/io.hpp"
#include "pibench/harness.hpp"
