#pragma once

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc {

/// Code from a model response, tried in order:
///  1. the first ``` fenced block whose info string names `language_hint`;
///  2. the first fenced block of any language (an unterminated fence runs to the end);
///  3. the unfenced code region: from the first definition line (def, class, function,
///     fn, func, ...) or, failing that, the first code-looking line, extended back over
///     adjacent non-prose lines, to the end of the response;
///  4. empty.
/// Leading and trailing blank lines are dropped. extract_code(extract_code(x)) ==
/// extract_code(x) for code without prose lines.
std::string extract_code(std::string_view response, std::optional<std::string_view> language_hint = std::nullopt);

/// Statement patterns that count as non-functional stubs (ECMAScript, case-insensitive).
struct PlaceholderConfig {
    std::vector<std::string> patterns = {
        R"(^pass$)",
        R"(^\.\.\.$)",
        R"(^(todo|fixme|xxx)\b.*$)",
        R"(^(todo|unimplemented)!\(.*\)$)",
        R"(^raise\s+NotImplemented(Error)?\b.*$)",
        R"(^throw\s+.*not\s*implemented.*$)",
        R"(^throw\s+new\s+(UnsupportedOperationException|NotImplementedException)\b.*$)",
        R"(^panic\(.*not\s*implemented.*\)$)",
    };
};

/// True iff, after removing comments, docstrings and blank lines, every remaining
/// statement is a definition header, a brace, or matches a placeholder pattern.
bool placeholder_scan(std::string_view code, const PlaceholderConfig& cfg = {});

struct ResponseRecord {
    std::string benchmark;
    std::string response;
    std::string extracted;
    bool placeholder_only = false;
    bool empty_flag = false;  ///< nothing functional left after placeholder removal
};

ResponseRecord make_record(std::string benchmark, std::string response,
                           std::optional<std::string_view> language_hint = std::nullopt,
                           const PlaceholderConfig& cfg = {});

/// Fraction of records with empty_flag. Throws input_error for an empty list.
double empty_ratio(const std::vector<ResponseRecord>& records);

inline constexpr double kStopEmptyRatio = 0.01;

/// Halt iff the empty ratio is at most 1%. Throws input_error outside [0, 1].
bool stop_predicate(double ratio);
/// Same decision in exact integer arithmetic: 100 * empty <= total.
bool stop_predicate(std::size_t empty, std::size_t total);

std::vector<ResponseRecord> read_responses(const std::filesystem::path& path, std::optional<std::string_view> hint,
                                           const PlaceholderConfig& cfg = {});
nlohmann::json record_json(const ResponseRecord& r);

}  // namespace codebpc
