#pragma once

// Convenience header pulling in the whole library.

#include "readyrules/errors.hpp"
#include "readyrules/labels.hpp"
#include "readyrules/statedyn.hpp"
#include "readyrules/rules.hpp"
#include "readyrules/stats.hpp"
#include "readyrules/scenarios.hpp"
#include "readyrules/pulse.hpp"
#include "readyrules/ensemble.hpp"
#include "readyrules/acceptance.hpp"
