#include "srpeval/annotation.hpp"

#include <algorithm>

#include "srpeval/error.hpp"

namespace srpeval {

std::optional<Driver> parse_driver(std::string_view name) {
    for (const auto& info : kDriverCatalog)
        if (info.name == name) return info.driver;
    return std::nullopt;
}

std::optional<Driver> driver_for_question(int q) {
    for (const auto& info : kDriverCatalog)
        if (info.question == q) return info.driver;
    return std::nullopt;
}

void normalize_annotation(Annotation& a) {
    if (a.sample_id.empty()) throw Error(ErrorClass::Validation, "annotation has empty sample_id");
    if (a.annotator_id.empty()) throw Error(ErrorClass::Validation, "annotation has empty annotator_id");
    std::sort(a.drivers.begin(), a.drivers.end());
    a.drivers.erase(std::unique(a.drivers.begin(), a.drivers.end()), a.drivers.end());
    if (a.label == Label::NotComplex && !a.drivers.empty())
        throw Error(ErrorClass::Validation,
                    "annotation for sample '" + a.sample_id + "' selects drivers but is labeled NotComplex");
}

}  // namespace srpeval
