#pragma once

// Umbrella header.

#include "cropnet/error.hpp"
#include "cropnet/rng.hpp"
#include "cropnet/csv.hpp"
#include "cropnet/signal.hpp"
#include "cropnet/features.hpp"
#include "cropnet/taxonomy.hpp"
#include "cropnet/kernels/tensor.hpp"
#include "cropnet/kernels/layers.hpp"
#include "cropnet/kernels/lstm.hpp"
#include "cropnet/kernels/adam.hpp"
#include "cropnet/kernels/checkpoint.hpp"
#include "cropnet/model.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/pipeline.hpp"
#include "cropnet/train.hpp"
#include "cropnet/eval.hpp"
#include "cropnet/synth.hpp"
#include "cropnet/config.hpp"
