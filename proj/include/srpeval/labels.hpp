#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace srpeval {

/// Binary complexity label. Complex is the positive class everywhere.
enum class Label { Complex, NotComplex };

enum class Category { Hardlines, Consumables, Softlines, Other };

enum class Protocol { Standard, Diagnostic };

/// Binarized model score: Complex iff source_score <= threshold_used.
struct BinaryPrediction {
    Label label = Label::NotComplex;
    int source_score = 0;
    int threshold_used = 0;

    bool operator==(const BinaryPrediction&) const = default;
};

inline constexpr std::array<Category, 4> kAllCategories{Category::Hardlines, Category::Consumables,
                                                        Category::Softlines, Category::Other};

std::string_view to_string(Label l);
std::string_view to_string(Category c);
std::string_view to_string(Protocol p);

std::optional<Label> parse_label(std::string_view s);
std::optional<Category> parse_category(std::string_view s);
std::optional<Protocol> parse_protocol(std::string_view s);

}  // namespace srpeval
