#pragma once

#include "jscc/channel.hpp"
#include "jscc/checkpoint.hpp"
#include "jscc/codec.hpp"
#include "jscc/config.hpp"
#include "jscc/constellation.hpp"
#include "jscc/data.hpp"
#include "jscc/experiment.hpp"
#include "jscc/metrics.hpp"
#include "jscc/quantizer.hpp"
#include "jscc/training.hpp"
#include "jscc/synthetic.hpp"
