#pragma once

#include "cogsteer/bench/io.hpp"
#include "cogsteer/bench/parse.hpp"
#include "cogsteer/bench/scoring.hpp"
#include "cogsteer/bench/synthetic.hpp"
#include "cogsteer/bench/templates.hpp"
#include "cogsteer/bench/types.hpp"
#include "cogsteer/core/error.hpp"
#include "cogsteer/core/format.hpp"
#include "cogsteer/core/hash.hpp"
#include "cogsteer/core/parallel.hpp"
#include "cogsteer/core/rng.hpp"
#include "cogsteer/core/stats.hpp"
#include "cogsteer/core/svg.hpp"
#include "cogsteer/io/activation_store.hpp"
#include "cogsteer/io/tensor_container.hpp"
#include "cogsteer/model/planted.hpp"
#include "cogsteer/model/tokenizer.hpp"
#include "cogsteer/model/transformer.hpp"
#include "cogsteer/model/weights.hpp"
#include "cogsteer/pipeline/config.hpp"
#include "cogsteer/pipeline/stages.hpp"
#include "cogsteer/probe/analysis.hpp"
#include "cogsteer/probe/dataset.hpp"
#include "cogsteer/probe/export.hpp"
#include "cogsteer/probe/probes.hpp"
#include "cogsteer/remote/client.hpp"
#include "cogsteer/remote/fixtures.hpp"
#include "cogsteer/remote/profile.hpp"
#include "cogsteer/steer/evaluate.hpp"
#include "cogsteer/steer/grid.hpp"
#include "cogsteer/steer/robustness.hpp"
#include "cogsteer/trajectory/monitor.hpp"
#include "cogsteer/trajectory/render.hpp"
#include "cogsteer/trajectory/stats.hpp"
