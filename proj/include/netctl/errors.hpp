#pragma once

#include <stdexcept>
#include <string>

namespace netctl {

// Thrown when an interval Gramian (or its square-root factor) is too
// ill-conditioned for any double-precision result to be meaningful.
struct near_singular_error : std::runtime_error {
    double cond;
    explicit near_singular_error(double c, const std::string& what)
        : std::runtime_error(what), cond(c) {}
};

// Thrown when no controllable driver set could be found.
struct not_controllable_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (CLI surfaces this as exit code 2).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace netctl
