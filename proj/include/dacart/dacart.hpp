#pragma once

#include "dacart/error.hpp"
#include "dacart/rng.hpp"
#include "dacart/parallel.hpp"
#include "dacart/data.hpp"
#include "dacart/tree.hpp"
#include "dacart/boost.hpp"
#include "dacart/weights.hpp"
#include "dacart/pipeline.hpp"
#include "dacart/metrics.hpp"
#include "dacart/simlab.hpp"
