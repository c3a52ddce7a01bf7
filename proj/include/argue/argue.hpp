#pragma once

#include "argue/adam.hpp"
#include "argue/baseline.hpp"
#include "argue/clustering.hpp"
#include "argue/data.hpp"
#include "argue/error.hpp"
#include "argue/experiment.hpp"
#include "argue/matrix.hpp"
#include "argue/metrics.hpp"
#include "argue/model.hpp"
#include "argue/nn.hpp"
#include "argue/persistence.hpp"
#include "argue/random.hpp"
#include "argue/trainer.hpp"
