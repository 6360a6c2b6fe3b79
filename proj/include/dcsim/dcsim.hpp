#pragma once

#include "dcsim/engine.hpp"
#include "dcsim/cloudlet.hpp"
#include "dcsim/scheduling.hpp"
#include "dcsim/resources.hpp"
#include "dcsim/placement.hpp"
#include "dcsim/network.hpp"
#include "dcsim/orchestration.hpp"
#include "dcsim/scenario.hpp"
#include "dcsim/report.hpp"
