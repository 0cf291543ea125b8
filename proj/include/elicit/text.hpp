#pragma once

#include <string>
#include <string_view>
#include <vector>

// Byte-level string helpers. Everything here is ASCII-aware only and treats
// other bytes as opaque, so arbitrary (even invalid) UTF-8 passes through.
namespace elicit::text {

inline bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_alnum(char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline bool is_punct(char c)
{
    const auto u = static_cast<unsigned char>(c);
    return u > 0x20 && u < 0x7f && !is_alnum(c);
}

inline char to_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string_view trim(std::string_view s);
std::string_view trim_left(std::string_view s);
std::string_view trim_right(std::string_view s);

/// Drops leading whitespace and ASCII punctuation.
std::string_view trim_left_punct(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

/// True when `s` starts with `word` (case-insensitive) and the next byte, if
/// any, is not alphanumeric.
bool starts_with_word(std::string_view s, std::string_view word);

/// Removes every leading occurrence of `marker` (e.g. "###Assistant"),
/// together with a following ':' and surrounding whitespace, then trims.
/// strip_marker(strip_marker(x, m), m) == strip_marker(x, m).
std::string strip_marker(std::string_view s, std::string_view marker);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace elicit::text
