#pragma once

#include "tsrnet/checkpoint.hpp"
#include "tsrnet/config.hpp"
#include "tsrnet/dataset.hpp"
#include "tsrnet/layers.hpp"
#include "tsrnet/loss.hpp"
#include "tsrnet/masking.hpp"
#include "tsrnet/network.hpp"
#include "tsrnet/optimizer.hpp"
#include "tsrnet/peaks.hpp"
#include "tsrnet/pipeline.hpp"
#include "tsrnet/ptbxl.hpp"
#include "tsrnet/rng.hpp"
#include "tsrnet/scoring.hpp"
#include "tsrnet/signal.hpp"
#include "tsrnet/stft.hpp"
#include "tsrnet/synth.hpp"
#include "tsrnet/tensor.hpp"
#include "tsrnet/trainer.hpp"
#include "tsrnet/wfdb.hpp"
