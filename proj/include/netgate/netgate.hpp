#pragma once

#include "netgate/error.hpp"
#include "netgate/random.hpp"
#include "netgate/graph.hpp"
#include "netgate/design.hpp"
#include "netgate/features.hpp"
#include "netgate/predictors.hpp"
#include "netgate/estimators.hpp"
#include "netgate/inference.hpp"
#include "netgate/analysis.hpp"
#include "netgate/parallel.hpp"
#include "netgate/simulate.hpp"
#include "netgate/format.hpp"
#include "netgate/io.hpp"
