// Umbrella header.

#pragma once

#include "prtest/gradcheck.hpp"
#include "prtest/gradient.hpp"
#include "prtest/inference.hpp"
#include "prtest/io.hpp"
#include "prtest/model.hpp"
#include "prtest/objective.hpp"
#include "prtest/parallel.hpp"
#include "prtest/recursion.hpp"
#include "prtest/rng.hpp"
#include "prtest/simulation.hpp"
#include "prtest/stats.hpp"
#include "prtest/vec4.hpp"
