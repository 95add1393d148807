#pragma once

#include "qsk/experiments/config.hpp"
#include "qsk/experiments/report.hpp"
#include "qsk/experiments/scenarios.hpp"
