// Umbrella header.
#pragma once

#include "hood/core.hpp"
#include "hood/detectors.hpp"
#include "hood/experiment.hpp"
#include "hood/hierarchy.hpp"
#include "hood/io.hpp"
#include "hood/losses.hpp"
#include "hood/metrics.hpp"
#include "hood/mixing.hpp"
#include "hood/model.hpp"
#include "hood/records.hpp"
#include "hood/render.hpp"
#include "hood/rng.hpp"
#include "hood/synth.hpp"
#include "hood/trainer.hpp"
#include "hood/version.hpp"
