#pragma once

#include "hlab/core.hpp"
#include "hlab/curriculum.hpp"
#include "hlab/dataset.hpp"
#include "hlab/ensemble.hpp"
#include "hlab/hardness.hpp"
#include "hlab/learners.hpp"
#include "hlab/metalearn.hpp"
#include "hlab/stats.hpp"
#include "hlab/harness.hpp"
