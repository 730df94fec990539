#pragma once

#include "ccb/arms.hpp"
#include "ccb/classifiers.hpp"
#include "ccb/common.hpp"
#include "ccb/config.hpp"
#include "ccb/context.hpp"
#include "ccb/control.hpp"
#include "ccb/dataset.hpp"
#include "ccb/environment.hpp"
#include "ccb/extensions.hpp"
#include "ccb/metrics.hpp"
#include "ccb/oracle.hpp"
#include "ccb/policy_common.hpp"
#include "ccb/policy_cos.hpp"
#include "ccb/policy_cosmc.hpp"
#include "ccb/policy_dcza.hpp"
#include "ccb/rng.hpp"
#include "ccb/simulator.hpp"
