#pragma once

#include <stdexcept>
#include <string>

namespace readyrules {

// Anything wrong with inputs, configuration or rule preconditions.
// The command line maps these to exit code 1.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad schedule, bad parameter ranges, inconsistent couplings.
struct config_error : validation_error {
    using validation_error::validation_error;
};

// Scenario file does not match the schema; message carries the field path.
struct parse_error : validation_error {
    using validation_error::validation_error;
};

// A reduction rule was applied to a state that does not admit it.
struct rule_error : validation_error {
    using validation_error::validation_error;
};

// Model preconditions violated (degenerate state, receptor saturation, ...).
struct model_error : validation_error {
    using validation_error::validation_error;
};

// Integration produced NaN/Inf. The command line maps this to exit code 2.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace readyrules
