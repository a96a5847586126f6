#pragma once

// Umbrella header: the whole dropout-based Bayesian BNN test toolkit.

#include "spintest/atpg.hpp"
#include "spintest/campaign.hpp"
#include "spintest/dataset.hpp"
#include "spintest/detector.hpp"
#include "spintest/dropout.hpp"
#include "spintest/engine.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/faults.hpp"
#include "spintest/inference.hpp"
#include "spintest/network.hpp"
#include "spintest/parallel.hpp"
#include "spintest/rng.hpp"
#include "spintest/serialize.hpp"
#include "spintest/tensor.hpp"
#include "spintest/trainer.hpp"
#include "spintest/version.hpp"
