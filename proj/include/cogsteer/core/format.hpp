#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace cogsteer {

// Shortest round-trip decimal form; stable across runs, so CSV and JSON
// artifacts stay byte-identical.
inline std::string fmt_num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (v == 0.0) {
        return "0";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        return "nan";
    }
    return {buf, ptr};
}

// Fixed precision, for human-facing tables.
inline std::string fmt_fixed(double v, int digits) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
    if (ec != std::errc{}) {
        return "nan";
    }
    return {buf, ptr};
}

} // namespace cogsteer
