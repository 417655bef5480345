#pragma once

#include "ensemble/campaign/hooks.hpp"
#include "ensemble/campaign/records.hpp"
#include "ensemble/campaign/state.hpp"
#include "ensemble/campaign/types.hpp"
#include "ensemble/campaign/validate.hpp"
