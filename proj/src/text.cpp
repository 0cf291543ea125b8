#include "elicit/text.hpp"

namespace elicit::text {

std::string_view trim_left(std::string_view s)
{
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    return s;
}

std::string_view trim_right(std::string_view s)
{
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string_view trim(std::string_view s) { return trim_right(trim_left(s)); }

std::string_view trim_left_punct(std::string_view s)
{
    while (!s.empty() && (is_space(s.front()) || is_punct(s.front()))) s.remove_prefix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (to_lower(a[i]) != to_lower(b[i])) return false;
    }
    return true;
}

bool istarts_with(std::string_view s, std::string_view prefix)
{
    return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

bool starts_with_word(std::string_view s, std::string_view word)
{
    if (!istarts_with(s, word)) return false;
    return s.size() == word.size() || !is_alnum(s[word.size()]);
}

std::string strip_marker(std::string_view s, std::string_view marker)
{
    s = trim(s);
    while (!marker.empty() && istarts_with(s, marker)) {
        s.remove_prefix(marker.size());
        s = trim_left(s);
        if (!s.empty() && s.front() == ':') s.remove_prefix(1);
        s = trim(s);
    }
    return std::string(s);
}

std::vector<std::string> split_lines(std::string_view s)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        std::string_view line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    if (!lines.empty() && !lines.back().empty() && lines.back().back() == '\r') lines.back().pop_back();
    return lines;
}

}  // namespace elicit::text
