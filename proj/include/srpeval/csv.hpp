#pragma once

#include <string>
#include <string_view>

namespace srpeval {

/// RFC 4180 field quoting: wraps in quotes when the field holds a comma, quote or newline.
inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace srpeval
