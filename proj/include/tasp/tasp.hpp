#pragma once

#include "tasp/core.hpp"
#include "tasp/features.hpp"
#include "tasp/patch_search.hpp"
#include "tasp/clustering.hpp"
#include "tasp/metrics.hpp"
#include "tasp/io.hpp"
#include "tasp/datasets.hpp"
#include "tasp/manifest.hpp"
