#pragma once

#include "codebpc/document.hpp"

#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc {

struct FilterDecision {
    bool keep = true;
    std::string reason;  ///< empty when kept

    static FilterDecision accept() { return {}; }
    static FilterDecision reject(std::string why) { return {false, std::move(why)}; }
};

inline constexpr std::size_t kDefaultMinTokens = 128;

/// Rejects documents with token_count strictly below min_tokens.
FilterDecision filter_min_tokens(const CodeDocument& doc, std::size_t min_tokens = kDefaultMinTokens);

struct BoilerplateConfig {
    /// Case-insensitive; a leading comment block is stripped when any line matches.
    std::string header_pattern = R"(copyright|licen[cs]e|spdx|all rights reserved|\(c\)\s*\d{4})";
    /// Case-insensitive; matched against trailing comment lines.
    std::string trailing_pattern = R"(vim?:|-\*-.*-\*-|local variables:|end:|@generated|generated by)";
};

struct StripResult {
    CodeDocument doc;
    bool emptied = false;    ///< nothing but whitespace remains
    std::size_t removed_bytes = 0;
};

class BoilerplateStripper {
public:
    explicit BoilerplateStripper(const BoilerplateConfig& cfg = {});
    /// Removes leading license/copyright comment blocks and trailing metadata comment
    /// lines. The retained region is a byte-identical slice of the original.
    StripResult strip(const CodeDocument& doc) const;

private:
    std::regex header_;
    std::regex trailing_;
};

StripResult strip_boilerplate(const CodeDocument& doc, const BoilerplateConfig& cfg = {});

struct TimeWindow {
    Date start;
    Date end;

    /// Throws config_error unless start <= end.
    TimeWindow(Date s, Date e);
    static TimeWindow parse(std::string_view since, std::string_view until);
};

/// Keeps iff start <= created_at <= end (inclusive). Missing dates are rejected.
FilterDecision filter_timestamp(const CodeDocument& doc, const TimeWindow& window);
/// Variant for unparsed metadata: malformed text is rejected with a diagnostic.
FilterDecision filter_timestamp(std::string_view created_at, const TimeWindow& window);

/// Generic rule-based quality check: rejects when the fraction of non-blank lines
/// matching `pattern` exceeds `max_fraction`.
struct LineRatioRule {
    std::string name;
    std::string pattern;
    double max_fraction = 1.0;
};

class QualityFilter {
public:
    explicit QualityFilter(std::vector<LineRatioRule> rules);
    FilterDecision check(const CodeDocument& doc) const;
    bool empty() const noexcept { return rules_.empty(); }

    /// Comment-heavy files: more than 80% comment lines.
    static LineRatioRule comment_ratio_rule(double max_fraction = 0.8);

private:
    struct Compiled {
        LineRatioRule rule;
        std::regex re;
    };
    std::vector<Compiled> rules_;
};

}  // namespace codebpc
