#pragma once

#include "safelabel/attention.hpp"
#include "safelabel/config.hpp"
#include "safelabel/errors.hpp"
#include "safelabel/geometry.hpp"
#include "safelabel/image_io.hpp"
#include "safelabel/pipeline.hpp"
#include "safelabel/policy.hpp"
#include "safelabel/reward.hpp"
#include "safelabel/risk.hpp"
#include "safelabel/semantics.hpp"
#include "safelabel/sim.hpp"
