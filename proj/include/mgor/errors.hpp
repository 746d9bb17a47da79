#pragma once

#include <stdexcept>
#include <string>

namespace mgor {

/// Bad input: malformed spec, out-of-range argument, dimension mismatch.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Field or energy queried closer than the singularity guard.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integration produced non-finite coordinates.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, long step_index)
        : std::runtime_error(what), step_(step_index) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

} // namespace mgor
