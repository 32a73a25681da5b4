#pragma once

// Umbrella header for the whole library: trace model, file ingest, window
// features, speed regression, activity classifiers, evaluation harness,
// synthetic corpus generator, and model persistence.

#include "wifimob/classify.hpp"
#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/eval.hpp"
#include "wifimob/features.hpp"
#include "wifimob/gpr.hpp"
#include "wifimob/ingest.hpp"
#include "wifimob/model_io.hpp"
#include "wifimob/rng.hpp"
#include "wifimob/synth.hpp"
#include "wifimob/trace.hpp"
