#pragma once

// Umbrella header.

#include "litetrack/cli.hpp"
#include "litetrack/config.hpp"
#include "litetrack/cost.hpp"
#include "litetrack/encoder.hpp"
#include "litetrack/errors.hpp"
#include "litetrack/head.hpp"
#include "litetrack/image_io.hpp"
#include "litetrack/loss.hpp"
#include "litetrack/rng.hpp"
#include "litetrack/runtime.hpp"
#include "litetrack/synthetic.hpp"
#include "litetrack/tensor.hpp"
#include "litetrack/verify.hpp"
#include "litetrack/weights.hpp"
