#pragma once

#include <stdexcept>
#include <string>

namespace jscc {

/// Broad failure classes. The CLI maps each one to its own exit code.
enum class ErrorCategory {
    constellation = 10,
    shape = 11,
    channel = 12,
    contract = 13,
    config = 20,
    data = 30,
    checkpoint = 40,
    divergence = 50,
    device = 60,
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::constellation: return "constellation";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::channel: return "channel";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::checkpoint: return "checkpoint";
    case ErrorCategory::divergence: return "divergence";
    case ErrorCategory::device: return "device";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

inline void require(bool ok, ErrorCategory category, const std::string& message) {
    if (!ok) throw Error(category, message);
}

} // namespace jscc
