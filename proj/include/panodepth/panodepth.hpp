#pragma once

#include "panodepth/config.hpp"
#include "panodepth/core.hpp"
#include "panodepth/curation/digest.hpp"
#include "panodepth/curation/manifest.hpp"
#include "panodepth/curation/pipeline.hpp"
#include "panodepth/curation/process.hpp"
#include "panodepth/curation/stages.hpp"
#include "panodepth/error.hpp"
#include "panodepth/geometry.hpp"
#include "panodepth/gradcheck.hpp"
#include "panodepth/io.hpp"
#include "panodepth/losses.hpp"
#include "panodepth/metrics.hpp"
#include "panodepth/random.hpp"
#include "panodepth/raster.hpp"
#include "panodepth/report_json.hpp"
#include "panodepth/reproject.hpp"
