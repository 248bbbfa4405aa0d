#pragma once

#include "surgatt/benchmark.hpp"
#include "surgatt/commands.hpp"
#include "surgatt/config.hpp"
#include "surgatt/error.hpp"
#include "surgatt/features.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/gradcheck.hpp"
#include "surgatt/gradsuite.hpp"
#include "surgatt/grid.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/io.hpp"
#include "surgatt/linalg.hpp"
#include "surgatt/losses.hpp"
#include "surgatt/metrics.hpp"
#include "surgatt/model.hpp"
#include "surgatt/stats.hpp"
#include "surgatt/synth.hpp"
#include "surgatt/tracker.hpp"
