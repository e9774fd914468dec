#pragma once

#include "osmac/bench.hpp"
#include "osmac/dataset.hpp"
#include "osmac/errors.hpp"
#include "osmac/estimators.hpp"
#include "osmac/glm.hpp"
#include "osmac/rng.hpp"
#include "osmac/sampling.hpp"
#include "osmac/ssp.hpp"
#include "osmac/synth.hpp"
#include "osmac/types.hpp"
