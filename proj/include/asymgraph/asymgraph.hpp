#pragma once

#include "asymgraph/adam.hpp"
#include "asymgraph/checkpoint.hpp"
#include "asymgraph/coldstart.hpp"
#include "asymgraph/common.hpp"
#include "asymgraph/config.hpp"
#include "asymgraph/eval.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/log.hpp"
#include "asymgraph/loss.hpp"
#include "asymgraph/model.hpp"
#include "asymgraph/retrieval.hpp"
#include "asymgraph/sampler.hpp"
#include "asymgraph/synthgen.hpp"
#include "asymgraph/trainer.hpp"
