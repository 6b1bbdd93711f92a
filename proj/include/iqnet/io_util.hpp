#pragma once

#include <cstdio>
#include <string>

namespace iqnet {

// Formats a double deterministically with enough digits to round-trip.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace iqnet
