#pragma once

#include "creditrisk/boosting.hpp"
#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/forest.hpp"
#include "creditrisk/metrics.hpp"
#include "creditrisk/model_io.hpp"
#include "creditrisk/models.hpp"
#include "creditrisk/parallel.hpp"
#include "creditrisk/rng.hpp"
#include "creditrisk/schema_file.hpp"
#include "creditrisk/synthetic.hpp"
#include "creditrisk/text.hpp"
#include "creditrisk/tree.hpp"
#include "creditrisk/tuning.hpp"
