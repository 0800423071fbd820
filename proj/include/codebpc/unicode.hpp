#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc::utf8 {

/// Decodes one scalar starting at text[pos]; advances pos. Malformed input yields
/// U+FFFD and consumes a single byte.
char32_t decode_next(std::string_view text, std::size_t& pos) noexcept;

void append(std::string& out, char32_t cp);

/// Number of Unicode scalar values (the unit every "character" count uses).
std::size_t scalar_count(std::string_view text) noexcept;

/// Re-encodes text with each malformed sequence replaced by U+FFFD.
std::string sanitize(std::string_view text);

/// Byte offsets of each scalar boundary, including text.size() at the end.
std::vector<std::size_t> boundaries(std::string_view text);

bool is_valid(std::string_view text) noexcept;

}  // namespace codebpc::utf8
