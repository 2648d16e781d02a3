// Convenience umbrella header.
#pragma once

#include "afwave/audio.hpp"
#include "afwave/common.hpp"
#include "afwave/dataset.hpp"
#include "afwave/detector.hpp"
#include "afwave/eval.hpp"
#include "afwave/extraction.hpp"
#include "afwave/fft.hpp"
#include "afwave/filter.hpp"
#include "afwave/nn.hpp"
#include "afwave/probe.hpp"
#include "afwave/purify.hpp"
#include "afwave/quality.hpp"
#include "afwave/series.hpp"
#include "afwave/sim.hpp"
#include "afwave/swt.hpp"
