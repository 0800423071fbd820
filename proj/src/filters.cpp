#include "codebpc/filters.hpp"

#include "codebpc/common.hpp"

#include <algorithm>

namespace codebpc {

FilterDecision filter_min_tokens(const CodeDocument& doc, std::size_t min_tokens) {
    if (doc.token_count < min_tokens)
        return FilterDecision::reject("too short: " + std::to_string(doc.token_count) + " < " +
                                      std::to_string(min_tokens) + " tokens");
    return FilterDecision::accept();
}

namespace {

struct Line {
    std::size_t begin;  // first byte
    std::size_t end;    // one past the newline (or end of text)
    std::string_view text;  // without the newline
};

std::vector<Line> split_lines(std::string_view s) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t nl = s.find('\n', pos);
        const std::size_t stop = nl == std::string_view::npos ? s.size() : nl;
        const std::size_t next = nl == std::string_view::npos ? s.size() : nl + 1;
        lines.push_back({pos, next, s.substr(pos, stop - pos)});
        pos = next;
    }
    return lines;
}

std::string_view trim_left(std::string_view s) {
    const auto i = s.find_first_not_of(" \t\r\f\v");
    return i == std::string_view::npos ? std::string_view{} : s.substr(i);
}

bool blank(std::string_view s) { return trim_left(s).empty(); }

// Line-comment prefix of the line, or empty if it is not a line comment.
std::string_view line_comment_prefix(std::string_view line) {
    const auto t = trim_left(line);
    for (std::string_view p : {"//", "--", ";;", "%"})
        if (t.starts_with(p)) return p;
    if (t.starts_with("#")) {
        // Preprocessor directives are code, not comments.
        if (t.size() == 1 || t[1] == ' ' || t[1] == '\t' || t[1] == '!' || t[1] == '#' || t[1] == '\r') return "#";
    }
    return {};
}

// Returns the index one past the comment block starting at lines[i], or i if none.
std::size_t comment_block_end(const std::vector<Line>& lines, std::size_t i) {
    const auto t = trim_left(lines[i].text);
    auto block = [&](std::string_view open, std::string_view close) -> std::size_t {
        if (!t.starts_with(open)) return i;
        if (t.substr(open.size()).find(close) != std::string_view::npos) return i + 1;
        for (std::size_t j = i + 1; j < lines.size(); ++j)
            if (lines[j].text.find(close) != std::string_view::npos) return j + 1;
        return lines.size();
    };
    if (auto e = block("/*", "*/"); e != i) return e;
    if (auto e = block("<!--", "-->"); e != i) return e;
    if (auto e = block("\"\"\"", "\"\"\""); e != i) return e;
    const auto prefix = line_comment_prefix(lines[i].text);
    if (prefix.empty()) return i;
    std::size_t j = i + 1;
    while (j < lines.size() && line_comment_prefix(lines[j].text) == prefix) ++j;
    return j;
}

bool block_matches(const std::vector<Line>& lines, std::size_t b, std::size_t e, const std::regex& re) {
    for (std::size_t k = b; k < e; ++k)
        if (std::regex_search(lines[k].text.begin(), lines[k].text.end(), re)) return true;
    return false;
}

}  // namespace

BoilerplateStripper::BoilerplateStripper(const BoilerplateConfig& cfg) {
    try {
        header_ = std::regex(cfg.header_pattern, std::regex::icase | std::regex::ECMAScript);
        trailing_ = std::regex(cfg.trailing_pattern, std::regex::icase | std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw config_error(std::string("invalid boilerplate pattern: ") + e.what());
    }
}

StripResult BoilerplateStripper::strip(const CodeDocument& doc) const {
    const std::string_view text = doc.content;
    const auto lines = split_lines(text);

    std::size_t first = 0;  // first retained line
    for (;;) {
        std::size_t q = first;
        while (q < lines.size() && blank(lines[q].text)) ++q;
        if (q >= lines.size()) break;
        const std::size_t e = comment_block_end(lines, q);
        if (e == q || !block_matches(lines, q, e, header_)) break;
        first = e;
        while (first < lines.size() && blank(lines[first].text)) ++first;
    }

    std::size_t last = lines.size();  // one past the last retained line
    for (;;) {
        std::size_t q = last;
        while (q > first && blank(lines[q - 1].text)) --q;
        if (q == first) break;
        const auto& l = lines[q - 1];
        if (line_comment_prefix(l.text).empty() || !std::regex_search(l.text.begin(), l.text.end(), trailing_)) break;
        last = q - 1;
        while (last > first && blank(lines[last - 1].text)) --last;
    }

    StripResult r{doc, false, 0};
    const std::size_t b = first < lines.size() ? lines[first].begin : text.size();
    std::size_t e = last > first ? lines[last - 1].end : b;
    if (last == lines.size()) e = text.size();
    if (b == 0 && e == text.size()) {
        r.emptied = text.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
        return r;
    }
    std::string_view kept = text.substr(b, e - b);
    if (kept.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos) {
        kept = {};
        r.emptied = true;
    }
    r.removed_bytes = text.size() - kept.size();
    r.doc.content = std::string(kept);
    r.doc.refresh_counts();
    return r;
}

StripResult strip_boilerplate(const CodeDocument& doc, const BoilerplateConfig& cfg) {
    return BoilerplateStripper(cfg).strip(doc);
}

TimeWindow::TimeWindow(Date s, Date e) : start(s), end(e) {
    if (!s.ok() || !e.ok()) throw config_error("time window bounds are not valid dates");
    if (e < s) throw config_error("time window start " + format_date(s) + " is after end " + format_date(e));
}

TimeWindow TimeWindow::parse(std::string_view since, std::string_view until) {
    Date s, e;
    try {
        s = parse_date(since, DateBound::start);
        e = parse_date(until, DateBound::end);
    } catch (const Error& err) {
        throw config_error(err.what());
    }
    return {s, e};
}

FilterDecision filter_timestamp(const CodeDocument& doc, const TimeWindow& window) {
    if (!doc.created_at) return FilterDecision::reject("missing created_at");
    const Date d = *doc.created_at;
    if (d < window.start || window.end < d)
        return FilterDecision::reject("created " + format_date(d) + " outside [" + format_date(window.start) + ", " +
                                      format_date(window.end) + "]");
    return FilterDecision::accept();
}

FilterDecision filter_timestamp(std::string_view created_at, const TimeWindow& window) {
    Date d;
    try {
        d = parse_date(created_at);
    } catch (const Error& e) {
        return FilterDecision::reject(e.what());
    }
    CodeDocument probe;
    probe.created_at = d;
    return filter_timestamp(probe, window);
}

QualityFilter::QualityFilter(std::vector<LineRatioRule> rules) {
    for (auto& r : rules) {
        if (r.max_fraction < 0.0 || r.max_fraction > 1.0)
            throw config_error("rule '" + r.name + "' max_fraction must lie in [0,1]");
        try {
            std::regex re(r.pattern, std::regex::ECMAScript);
            rules_.push_back({std::move(r), std::move(re)});
        } catch (const std::regex_error& e) {
            throw config_error("rule '" + r.name + "' has invalid pattern: " + e.what());
        }
    }
}

FilterDecision QualityFilter::check(const CodeDocument& doc) const {
    if (rules_.empty()) return FilterDecision::accept();
    const auto lines = split_lines(doc.content);
    std::size_t nonblank = 0;
    std::vector<std::size_t> hits(rules_.size(), 0);
    for (const auto& l : lines) {
        if (blank(l.text)) continue;
        ++nonblank;
        for (std::size_t i = 0; i < rules_.size(); ++i)
            if (std::regex_search(l.text.begin(), l.text.end(), rules_[i].re)) ++hits[i];
    }
    if (nonblank == 0) return FilterDecision::reject("no content lines");
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const double frac = static_cast<double>(hits[i]) / static_cast<double>(nonblank);
        if (frac > rules_[i].rule.max_fraction)
            return FilterDecision::reject(rules_[i].rule.name + ": " + std::to_string(frac) + " of lines");
    }
    return FilterDecision::accept();
}

LineRatioRule QualityFilter::comment_ratio_rule(double max_fraction) {
    return {"comment_ratio", R"(^\s*(//|#\s|#$|/\*|\*|--\s|<!--))", max_fraction};
}

}  // namespace codebpc
