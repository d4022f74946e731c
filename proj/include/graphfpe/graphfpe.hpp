#pragma once

// Umbrella header.

#include "graphfpe/calculus.hpp"
#include "graphfpe/dynamics.hpp"
#include "graphfpe/error.hpp"
#include "graphfpe/free_energy.hpp"
#include "graphfpe/graph.hpp"
#include "graphfpe/rates.hpp"
#include "graphfpe/spectrum.hpp"
#include "graphfpe/wasserstein.hpp"

namespace graphfpe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace graphfpe
