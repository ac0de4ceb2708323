#pragma once

#include "bsve/analysis.hpp"
#include "bsve/geweke.hpp"
#include "bsve/gibbs.hpp"
#include "bsve/io.hpp"
#include "bsve/model.hpp"
#include "bsve/prior.hpp"
#include "bsve/random.hpp"
#include "bsve/simulate.hpp"
#include "bsve/types.hpp"
#include "bsve/util.hpp"
#include "bsve/verification.hpp"
#include "bsve/volatility.hpp"
