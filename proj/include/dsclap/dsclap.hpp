#pragma once

// Umbrella header for the dsclap library: dual-encoder contrastive
// pretraining on paired audio/text with hard-negative matching, plus the
// synthetic data pipeline, optimizer, checkpointing, and the fine-tuning
// and evaluation harness.

#include "dsclap/checkpoint.hpp"
#include "dsclap/config.hpp"
#include "dsclap/data.hpp"
#include "dsclap/encoders.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/matrix.hpp"
#include "dsclap/model.hpp"
#include "dsclap/objectives.hpp"
#include "dsclap/optimizer.hpp"
#include "dsclap/random.hpp"
#include "dsclap/training.hpp"
