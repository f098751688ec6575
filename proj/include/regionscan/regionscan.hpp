#pragma once

// Umbrella header.

#include "regionscan/error.hpp"
#include "regionscan/snapshot.hpp"
#include "regionscan/cfg.hpp"
#include "regionscan/preprocess.hpp"
#include "regionscan/string_ranker.hpp"
#include "regionscan/node_mapper.hpp"
#include "regionscan/region_extractor.hpp"
#include "regionscan/features.hpp"
#include "regionscan/pipeline.hpp"
#include "regionscan/classifier/matrix.hpp"
#include "regionscan/classifier/scaler.hpp"
#include "regionscan/classifier/network.hpp"
#include "regionscan/classifier/metrics.hpp"
#include "regionscan/classifier/model_io.hpp"
#include "regionscan/config.hpp"
#include "regionscan/feature_io.hpp"
