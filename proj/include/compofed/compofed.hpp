#pragma once

#include "compofed/algorithm.hpp"
#include "compofed/analysis.hpp"
#include "compofed/baselines.hpp"
#include "compofed/core.hpp"
#include "compofed/datagen.hpp"
#include "compofed/dataset_io.hpp"
#include "compofed/objective.hpp"
#include "compofed/prox.hpp"
#include "compofed/rng.hpp"
#include "compofed/vectorized.hpp"
