#pragma once

#include "qgraphino/data.hpp"
#include "qgraphino/error.hpp"
#include "qgraphino/eval.hpp"
#include "qgraphino/graph.hpp"
#include "qgraphino/hybrid.hpp"
#include "qgraphino/qsim.hpp"
#include "qgraphino/rng.hpp"
#include "qgraphino/train.hpp"
