#pragma once

#include "sigd2/core.hpp"
#include "sigd2/dataset.hpp"
#include "sigd2/significance.hpp"
#include "sigd2/mining.hpp"
#include "sigd2/pruning.hpp"
#include "sigd2/classifier.hpp"
#include "sigd2/ensemble.hpp"
#include "sigd2/stats.hpp"
#include "sigd2/cv.hpp"
