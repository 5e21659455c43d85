#pragma once

#include "tinycount/coherence.hpp"
#include "tinycount/constructions.hpp"
#include "tinycount/data.hpp"
#include "tinycount/error.hpp"
#include "tinycount/harness.hpp"
#include "tinycount/introspection.hpp"
#include "tinycount/model.hpp"
#include "tinycount/numerics.hpp"
#include "tinycount/params_io.hpp"
#include "tinycount/rng.hpp"
#include "tinycount/training.hpp"
