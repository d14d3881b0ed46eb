#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace senslab {

/// Round-trip-exact decimal form of a double; "inf"/"-inf" for the
/// unbounded sentinels. One formatter everywhere keeps rerun outputs
/// byte-identical.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV field quoting: wraps in double quotes when the value contains a
/// comma, quote, or newline; embedded quotes are doubled.
inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

} // namespace senslab
