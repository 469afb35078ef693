#pragma once

#include <charconv>
#include <stdexcept>
#include <cmath>
#include <string>

namespace atesmpc {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Inverse of format_double; also accepts "inf", "-inf" and "nan".
inline double parse_double(const std::string& s)
{
    if (s == "inf" || s == "+inf")
        return HUGE_VAL;
    if (s == "-inf")
        return -HUGE_VAL;
    if (s == "nan")
        return NAN;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

} // namespace atesmpc
