#pragma once

#include "hgmp/augment.hpp"
#include "hgmp/encoder.hpp"
#include "hgmp/error.hpp"
#include "hgmp/experiments.hpp"
#include "hgmp/hetgraph.hpp"
#include "hgmp/io.hpp"
#include "hgmp/metrics.hpp"
#include "hgmp/optim.hpp"
#include "hgmp/pretrain.hpp"
#include "hgmp/prompt.hpp"
#include "hgmp/synthetic.hpp"
#include "hgmp/taskbuilder.hpp"
