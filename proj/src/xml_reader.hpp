#pragma once

// Minimal non-validating XML reader for analyzer reports. Supports elements,
// attributes, character data, CDATA, comments, processing instructions and
// a skipped DOCTYPE. No namespaces, no external entities.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vulnscore::xml {

struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Element> children;
    std::string text;
    std::size_t line = 0;
    std::size_t column = 0;

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes)
            if (k == key)
                return &v;
        return nullptr;
    }
};

/// Parses a complete document and returns its root element.
/// Throws FormatError carrying the line and column of the first problem.
Element parse(std::string_view text);

} // namespace vulnscore::xml
