#pragma once

// Umbrella header for the singing-voice-synthesis toolkit.

#include "svs/adversary.hpp"
#include "svs/checkpoint.hpp"
#include "svs/common.hpp"
#include "svs/dataset.hpp"
#include "svs/dsp.hpp"
#include "svs/evaluate.hpp"
#include "svs/fft.hpp"
#include "svs/hangul.hpp"
#include "svs/image.hpp"
#include "svs/melsyn.hpp"
#include "svs/midi.hpp"
#include "svs/nn.hpp"
#include "svs/optim.hpp"
#include "svs/pitch.hpp"
#include "svs/score.hpp"
#include "svs/srnet.hpp"
#include "svs/synthsong.hpp"
#include "svs/tensor.hpp"
#include "svs/trainer.hpp"
#include "svs/wav.hpp"
