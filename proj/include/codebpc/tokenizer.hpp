#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc {

/// Pipeline tokenizer: maximal identifier runs ([A-Za-z_] or non-ASCII start, then
/// letters/digits/_), maximal digit runs, and single punctuation characters.
/// Whitespace is discarded.
std::vector<std::string> tokenize_simple(std::string_view content);
std::size_t count_tokens_simple(std::string_view content);

/// Segmentations used for likelihood evaluation. Each covers the text exactly, so
/// the concatenation of the pieces reproduces the input.
enum class Segmentation {
    chars,    ///< one token per Unicode scalar
    pairs,    ///< consecutive scalar pairs (last token may be a single scalar)
    lexical,  ///< tokenize_simple pieces plus whitespace runs
};

std::vector<std::string> segment(std::string_view content, Segmentation mode);
std::string_view segmentation_name(Segmentation mode) noexcept;
Segmentation parse_segmentation(std::string_view name);

}  // namespace codebpc
