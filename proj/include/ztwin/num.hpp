#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <system_error>

#include "ztwin/errors.hpp"

namespace ztwin {

// Shortest decimal text that round-trips the exact double.  Used for every
// number written to CSV/JSON so emitted files are byte-stable and re-parsing
// reproduces the in-memory value bit for bit.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(std::int64_t v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc()) throw IoError("not a number: '" + text + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& text) {
    std::int64_t v = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc()) throw IoError("not an integer: '" + text + "'");
    return v;
}

} // namespace ztwin
