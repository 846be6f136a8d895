#pragma once

// Motion-aware pipelined video processing: everything in one include.

#include "pipeflow/analytics.hpp"
#include "pipeflow/backends.hpp"
#include "pipeflow/cost_model.hpp"
#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"
#include "pipeflow/frameio.hpp"
#include "pipeflow/interpolation.hpp"
#include "pipeflow/motion.hpp"
#include "pipeflow/pipeline.hpp"
#include "pipeflow/scheduler.hpp"
#include "pipeflow/segmentation.hpp"
#include "pipeflow/selection.hpp"
#include "pipeflow/synthetic.hpp"
#include "pipeflow/util.hpp"
