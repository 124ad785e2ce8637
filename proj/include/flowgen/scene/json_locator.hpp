#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace flowgen::scene {

struct TextPosition {
    int line = 1;
    int column = 1;
};

/// 1-based line and column of byte `offset` in `text`.
TextPosition position_of(std::string_view text, std::size_t offset);

/// Records where every value of a syntactically valid JSON document starts, keyed
/// by JSON pointer ("" for the root, "/a/0/b" below it).
class JsonLocator {
public:
    explicit JsonLocator(std::string_view text);

    /// Position of the value at `pointer`, or of its closest recorded ancestor.
    TextPosition locate(const std::string& pointer) const;

private:
    std::map<std::string, TextPosition> positions_;
};

} // namespace flowgen::scene
