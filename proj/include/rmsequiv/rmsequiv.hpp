#pragma once

#include "rmsequiv/data_model.hpp"
#include "rmsequiv/error.hpp"
#include "rmsequiv/estimation.hpp"
#include "rmsequiv/gt_engine.hpp"
#include "rmsequiv/io.hpp"
#include "rmsequiv/random_stream.hpp"
#include "rmsequiv/report.hpp"
#include "rmsequiv/sim_config.hpp"
#include "rmsequiv/sim_harness.hpp"
#include "rmsequiv/special_functions.hpp"
#include "rmsequiv/ztest.hpp"

namespace rmsequiv {

inline constexpr const char* version = "0.3.0";

}  // namespace rmsequiv
