#pragma once

#include <stdexcept>
#include <string>

namespace dnsl {

/// Invalid user-supplied data (bad forcing set, bad parameter, config violation).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested interval or index outside the available trajectory window.
class RangeError : public std::out_of_range {
public:
    explicit RangeError(const std::string& msg) : std::out_of_range(msg) {}
};

/// Non-finite state detected during time integration.
class StepError : public std::runtime_error {
public:
    StepError(const std::string& msg, long step) : std::runtime_error(msg), failing_step(step) {}
    long failing_step = -1;
};

/// Problem size exceeds a configured resource cap.
class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failure, carries the offending path in the message.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dnsl
