#pragma once

#include "snnbench/bench.hpp"
#include "snnbench/connectivity.hpp"
#include "snnbench/dynamics.hpp"
#include "snnbench/engine.hpp"
#include "snnbench/error.hpp"
#include "snnbench/io.hpp"
#include "snnbench/metrics.hpp"
#include "snnbench/model.hpp"
#include "snnbench/placement.hpp"
#include "snnbench/propagators.hpp"
#include "snnbench/rng.hpp"
