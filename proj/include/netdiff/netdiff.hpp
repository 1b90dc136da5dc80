#pragma once

#include "netdiff/graph.hpp"
#include "netdiff/signals.hpp"
#include "netdiff/gain_set.hpp"
#include "netdiff/core.hpp"
#include "netdiff/optimize.hpp"
#include "netdiff/gains.hpp"
#include "netdiff/protocol.hpp"
#include "netdiff/trigger.hpp"
#include "netdiff/sim.hpp"
#include "netdiff/check.hpp"
#include "netdiff/config.hpp"
#include "netdiff/io.hpp"
