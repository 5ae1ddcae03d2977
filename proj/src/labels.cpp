#include "srpeval/labels.hpp"

namespace srpeval {

std::string_view to_string(Label l) {
    return l == Label::Complex ? "Complex" : "NotComplex";
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::Hardlines: return "Hardlines";
        case Category::Consumables: return "Consumables";
        case Category::Softlines: return "Softlines";
        case Category::Other: return "Other";
    }
    return "Other";
}

std::string_view to_string(Protocol p) {
    return p == Protocol::Standard ? "standard" : "diagnostic";
}

std::optional<Label> parse_label(std::string_view s) {
    if (s == "Complex") return Label::Complex;
    if (s == "NotComplex") return Label::NotComplex;
    return std::nullopt;
}

std::optional<Category> parse_category(std::string_view s) {
    for (auto c : kAllCategories)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Protocol> parse_protocol(std::string_view s) {
    if (s == "standard" || s == "Standard") return Protocol::Standard;
    if (s == "diagnostic" || s == "Diagnostic") return Protocol::Diagnostic;
    return std::nullopt;
}

}  // namespace srpeval
