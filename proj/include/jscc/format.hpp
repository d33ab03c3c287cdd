#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace jscc {

/// Shortest round-trip decimal form, independent of the global locale.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_number(const std::string& text, double& out) {
    if (text == "inf" || text == "+inf") {
        out = HUGE_VAL;
        return true;
    }
    if (text == "-inf") {
        out = -HUGE_VAL;
        return true;
    }
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && first != last;
}

} // namespace jscc
