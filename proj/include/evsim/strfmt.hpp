#pragma once

#include <charconv>
#include <string>

namespace evsim {

/// Shortest round-trip decimal form of a double ("734", "0.3", "3095.2727272727275").
inline std::string num_str(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace evsim
