#pragma once

#include "softroute/numeric.hpp"
#include "softroute/deadline.hpp"
#include "softroute/model.hpp"
#include "softroute/erlang.hpp"
#include "softroute/miss_probability.hpp"
#include "softroute/bernoulli_split.hpp"
#include "softroute/policy.hpp"
#include "softroute/index_policy.hpp"
#include "softroute/mdp.hpp"
#include "softroute/simulator.hpp"
#include "softroute/experiment.hpp"
