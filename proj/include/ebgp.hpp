#pragma once

#include "ebgp/error.hpp"
#include "ebgp/rng.hpp"
#include "ebgp/kernel_gp.hpp"
#include "ebgp/manifold_stats.hpp"
#include "ebgp/quadrature.hpp"
#include "ebgp/priors.hpp"
#include "ebgp/sampler.hpp"
#include "ebgp/dataset.hpp"
#include "ebgp/datagen.hpp"
#include "ebgp/estimators.hpp"
#include "ebgp/theory_oracles.hpp"
#include "ebgp/config.hpp"
#include "ebgp/eval.hpp"
