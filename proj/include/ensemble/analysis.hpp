#pragma once

#include "ensemble/analysis/chamfer.hpp"
#include "ensemble/analysis/enrichment.hpp"
#include "ensemble/analysis/kdtree.hpp"
#include "ensemble/analysis/lof.hpp"
#include "ensemble/analysis/point_set.hpp"
