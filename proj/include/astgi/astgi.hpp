#pragma once

#include "astgi/errors.hpp"

#include "astgi/diffcore/adamw.hpp"
#include "astgi/diffcore/gradcheck.hpp"
#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"
#include "astgi/diffcore/tensor.hpp"

#include "astgi/data/io.hpp"
#include "astgi/data/normalizer.hpp"
#include "astgi/data/sample.hpp"
#include "astgi/data/split.hpp"
#include "astgi/data/synth.hpp"

#include "astgi/model/checkpoint.hpp"
#include "astgi/model/config.hpp"
#include "astgi/model/encoder.hpp"
#include "astgi/model/graph.hpp"
#include "astgi/model/mlp.hpp"
#include "astgi/model/model.hpp"
#include "astgi/model/predictor.hpp"
#include "astgi/model/propagation.hpp"

#include "astgi/train/config.hpp"
#include "astgi/train/metrics.hpp"
#include "astgi/train/trainer.hpp"

#include "astgi/harness/baselines.hpp"
#include "astgi/harness/experiment.hpp"
