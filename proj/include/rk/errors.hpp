#pragma once
#include <stdexcept>
#include <string>

namespace rk {

struct degenerate_input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct containment_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct rank_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct overflow_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct conditioning_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

} // namespace rk
