#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "srpeval/labels.hpp"

namespace srpeval {

/// Human-cited complexity drivers, in catalog order.
enum class Driver {
    ProductsTooSimilar,
    TextSmallOrDense,
    ColorsTooLoud,
    BoxesPackedTogether,
    TooManyBadges,
    ProductsIrrelevant,
    FilterSectionCrowded,
};

struct DriverInfo {
    Driver driver;
    std::string_view name;    // identifier used in files and the HTTP API
    std::string_view reason;  // wording shown to annotators
    int question;             // aligned diagnostic question number (1-based)
};

/// Fixed catalog. Driver -> question mapping is total and injective.
inline constexpr std::array<DriverInfo, 7> kDriverCatalog{{
    {Driver::ProductsTooSimilar, "ProductsTooSimilar", "Products look too similar", 4},
    {Driver::TextSmallOrDense, "TextSmallOrDense", "Text is small or too much to read", 5},
    {Driver::ColorsTooLoud, "ColorsTooLoud", "Colors/highlights are too loud", 2},
    {Driver::BoxesPackedTogether, "BoxesPackedTogether", "Product boxes are packed together", 6},
    {Driver::TooManyBadges, "TooManyBadges", "Too many badges, icons or labels", 7},
    {Driver::ProductsIrrelevant, "ProductsIrrelevant", "Products seem irrelevant", 15},
    {Driver::FilterSectionCrowded, "FilterSectionCrowded", "Filter section looks crowded", 3},
}};

inline constexpr std::size_t kDriverCount = kDriverCatalog.size();

constexpr std::size_t catalog_index(Driver d) { return static_cast<std::size_t>(d); }
constexpr const DriverInfo& driver_info(Driver d) { return kDriverCatalog[catalog_index(d)]; }

std::optional<Driver> parse_driver(std::string_view name);
/// Catalog driver aligned with diagnostic question `q` (1-based), if any.
std::optional<Driver> driver_for_question(int q);

struct Annotation {
    std::string sample_id;
    std::string annotator_id;
    Label label = Label::NotComplex;
    std::vector<Driver> drivers;  // unique, catalog order
    std::string submitted_at;

    bool operator==(const Annotation&) const = default;
};

/// Throws Error(Validation) when drivers are given with a NotComplex label, or
/// when ids are empty. Sorts and deduplicates drivers in place.
void normalize_annotation(Annotation& a);

}  // namespace srpeval
