#pragma once

#include "lqrflow/bounds.hpp"
#include "lqrflow/common.hpp"
#include "lqrflow/estimator.hpp"
#include "lqrflow/flows.hpp"
#include "lqrflow/io.hpp"
#include "lqrflow/model.hpp"
#include "lqrflow/sampling.hpp"
#include "lqrflow/verify.hpp"
