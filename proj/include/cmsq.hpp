#pragma once

// Umbrella header.
#include "cmsq/attention.hpp"
#include "cmsq/checkpoint.hpp"
#include "cmsq/config.hpp"
#include "cmsq/csv.hpp"
#include "cmsq/dataset.hpp"
#include "cmsq/errors.hpp"
#include "cmsq/gradcheck.hpp"
#include "cmsq/lstm.hpp"
#include "cmsq/matrix.hpp"
#include "cmsq/metrics.hpp"
#include "cmsq/model.hpp"
#include "cmsq/optim.hpp"
#include "cmsq/posts.hpp"
#include "cmsq/preprocess.hpp"
#include "cmsq/random.hpp"
#include "cmsq/split.hpp"
#include "cmsq/trainer.hpp"
