#pragma once

#include "mmshot/aggregate.hpp"
#include "mmshot/analysis.hpp"
#include "mmshot/error.hpp"
#include "mmshot/featurestore.hpp"
#include "mmshot/fusion.hpp"
#include "mmshot/metrics.hpp"
#include "mmshot/nn.hpp"
#include "mmshot/random.hpp"
#include "mmshot/sceneboundary.hpp"
#include "mmshot/textlab.hpp"
