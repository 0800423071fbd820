#include "codebpc/extraction.hpp"

#include "codebpc/common.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <regex>

namespace codebpc {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\f\v");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\f\v");
    return s.substr(b, e - b + 1);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string canonical_language(std::string_view name) {
    std::string l = lower(trim(name));
    if (l == "py" || l == "python3" || l == "py3") return "python";
    if (l == "c++" || l == "cc" || l == "cxx" || l == "hpp") return "cpp";
    if (l == "js" || l == "node") return "javascript";
    if (l == "ts") return "typescript";
    if (l == "sh" || l == "shell" || l == "zsh") return "bash";
    if (l == "rs") return "rust";
    if (l == "golang") return "go";
    if (l == "c#" || l == "csharp") return "cs";
    return l;
}

// Joins lines [b, e) after dropping blank lines at both ends.
std::string join_trimmed(const std::vector<std::string_view>& lines, std::size_t b, std::size_t e) {
    while (b < e && is_blank(lines[b])) ++b;
    while (e > b && is_blank(lines[e - 1])) --e;
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        if (i > b) out.push_back('\n');
        out.append(lines[i]);
    }
    return out;
}

bool starts_with_word(std::string_view s, std::string_view word) {
    return s.starts_with(word) && (s.size() == word.size() || !(std::isalnum(static_cast<unsigned char>(s[word.size()])) || s[word.size()] == '_'));
}

constexpr std::array kDefinitionKeywords = {"def",    "async def", "class",     "function", "fn",     "pub fn",
                                            "func",   "fun",       "public",    "private",  "protected",
                                            "static", "struct",    "impl",      "interface", "export function",
                                            "template", "module",  "sub"};

bool is_definition_line(std::string_view line) {
    const auto t = trim(line);
    for (std::string_view kw : kDefinitionKeywords)
        if (starts_with_word(t, kw)) return true;
    return false;
}

constexpr std::array kCodeLeaders = {"for",    "while", "if",     "else",   "elif",  "return", "import", "from",
                                     "with",   "try",   "except", "catch",  "case",  "switch", "let",    "const",
                                     "var",    "void",  "int",    "print",  "echo",  "select", "insert", "update",
                                     "delete", "create", "using", "package", "include", "assert", "yield", "raise",
                                     "throw",  "do",    "lambda", "async",  "await", "not",    "and",    "or"};

bool is_prose_line(std::string_view line) {
    const auto t = trim(line);
    if (t.empty() || !std::isalpha(static_cast<unsigned char>(t[0]))) return false;
    if (t.find_first_of("=(){}[];<>+*/%&|^~\"`$@#\\") != std::string_view::npos) return false;
    for (std::string_view kw : kCodeLeaders)
        if (starts_with_word(t, kw)) return false;
    if (is_definition_line(t)) return false;
    // A lead-in label such as "Solution:" or "Here is the fix:".
    if (t.back() == ':' && t.substr(0, t.size() - 1).find_first_not_of(
                               "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ ,'-") == std::string_view::npos)
        return true;
    std::size_t words = 0;
    bool in_word = false;
    for (char c : t) {
        const bool space = c == ' ' || c == '\t';
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words >= 4;
}

bool is_code_line(std::string_view line) {
    const auto t = trim(line);
    if (t.empty() || is_prose_line(t)) return false;
    if (is_definition_line(t)) return true;
    if (t.find_first_of("(){}=;[]") != std::string_view::npos) return true;
    for (std::string_view kw : {"import", "from", "#include", "using", "package", "return", "pass"})
        if (starts_with_word(t, kw)) return true;
    return t.starts_with("@");
}

struct Fence {
    std::string language;
    std::size_t body_begin;  // line index
    std::size_t body_end;    // exclusive
};

std::vector<Fence> find_fences(const std::vector<std::string_view>& lines) {
    std::vector<Fence> out;
    std::size_t i = 0;
    while (i < lines.size()) {
        const auto t = trim(lines[i]);
        if (!t.starts_with("```")) {
            ++i;
            continue;
        }
        auto info = trim(t.substr(3));
        const auto sp = info.find_first_of(" \t{");
        Fence f{canonical_language(info.substr(0, sp)), i + 1, lines.size()};
        std::size_t j = i + 1;
        for (; j < lines.size(); ++j)
            if (trim(lines[j]).starts_with("```")) break;
        f.body_end = j;
        out.push_back(std::move(f));
        i = j + 1;
    }
    return out;
}

}  // namespace

std::string extract_code(std::string_view response, std::optional<std::string_view> language_hint) {
    const auto lines = split_lines(response);
    const auto fences = find_fences(lines);
    if (!fences.empty()) {
        const Fence* pick = &fences.front();
        if (language_hint) {
            const auto want = canonical_language(*language_hint);
            for (const auto& f : fences)
                if (f.language == want) {
                    pick = &f;
                    break;
                }
        }
        return join_trimmed(lines, pick->body_begin, pick->body_end);
    }

    std::size_t anchor = lines.size();
    for (std::size_t i = 0; i < lines.size() && anchor == lines.size(); ++i)
        if (is_definition_line(lines[i]) && !is_prose_line(lines[i])) anchor = i;
    for (std::size_t i = 0; i < lines.size() && anchor == lines.size(); ++i)
        if (is_code_line(lines[i])) anchor = i;
    if (anchor == lines.size()) return {};
    std::size_t start = anchor;
    while (start > 0 && !is_prose_line(lines[start - 1])) --start;
    return join_trimmed(lines, start, lines.size());
}

namespace {

// Drops comments and docstrings while leaving string literals intact.
std::string strip_comments(std::string_view code) {
    std::string out;
    out.reserve(code.size());
    std::size_t i = 0;
    const auto at = [&](std::string_view s) { return code.substr(i, s.size()) == s; };
    bool line_start = true;
    while (i < code.size()) {
        const char c = code[i];
        if (at("\"\"\"") || at("'''")) {
            const std::string_view q = code.substr(i, 3);
            const auto end = code.find(q, i + 3);
            i = end == std::string_view::npos ? code.size() : end + 3;
            continue;
        }
        if (at("/*")) {
            const auto end = code.find("*/", i + 2);
            i = end == std::string_view::npos ? code.size() : end + 2;
            continue;
        }
        const bool hash_comment = c == '#' && (i + 1 >= code.size() || code[i + 1] == ' ' || code[i + 1] == '\t' ||
                                               code[i + 1] == '\n' || code[i + 1] == '#' || !line_start);
        if (at("//") || hash_comment || (line_start && at("--"))) {
            while (i < code.size() && code[i] != '\n') ++i;
            continue;
        }
        if (c == '"' || c == '\'' || c == '`') {
            const std::size_t b = i++;
            while (i < code.size() && code[i] != c && code[i] != '\n') i += code[i] == '\\' ? 2 : 1;
            i = std::min(i + 1, code.size());
            out.append(code.substr(b, i - b));
            line_start = false;
            continue;
        }
        out.push_back(c);
        if (c == '\n') {
            line_start = true;
        } else if (c != ' ' && c != '\t') {
            line_start = false;
        }
        ++i;
    }
    return out;
}

const std::regex& python_header() {
    static const std::regex re(R"(^(async\s+)?def\s+\w+\s*\(.*\)\s*(->\s*[^:]+)?:(.*)$)");
    return re;
}
const std::regex& class_header() {
    static const std::regex re(R"(^class\s+\w+[^:{]*[:{](.*)$)");
    return re;
}
const std::regex& brace_header() {
    static const std::regex re(
        R"(^(?!(if|for|while|switch|catch|else|do|try)\b)([^{}();=]*\([^{}]*\)[^{}();=]*|(struct|class|impl|interface|namespace|enum|trait|object)\b[^{}]*)\{(.*)$)");
    return re;
}

}  // namespace

bool placeholder_scan(std::string_view code, const PlaceholderConfig& cfg) {
    std::vector<std::regex> patterns;
    patterns.reserve(cfg.patterns.size());
    try {
        for (const auto& p : cfg.patterns) patterns.emplace_back(p, std::regex::icase | std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw config_error(std::string("invalid placeholder pattern: ") + e.what());
    }
    const std::string stripped = strip_comments(code);
    for (auto raw : split_lines(stripped)) {
        std::string line(trim(raw));
        if (line.empty() || line.starts_with("@")) continue;
        std::smatch m;
        if (std::regex_match(line, m, python_header())) {
            line = m[3].str();
        } else if (std::regex_match(line, m, class_header())) {
            line = m[1].str();
        } else if (std::regex_match(line, m, brace_header())) {
            line = m[4].str();
        }
        line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return c == '{' || c == '}'; }), line.end());
        std::string_view body = trim(line);
        while (!body.empty() && body.back() == ';') body = trim(body.substr(0, body.size() - 1));
        if (body.empty()) continue;
        const std::string stmt(body);
        const bool stub = std::any_of(patterns.begin(), patterns.end(),
                                      [&](const std::regex& re) { return std::regex_match(stmt, re); });
        if (!stub) return false;
    }
    return true;
}

ResponseRecord make_record(std::string benchmark, std::string response, std::optional<std::string_view> language_hint,
                           const PlaceholderConfig& cfg) {
    ResponseRecord r;
    r.benchmark = std::move(benchmark);
    r.response = std::move(response);
    r.extracted = extract_code(r.response, language_hint);
    r.placeholder_only = !is_blank(r.extracted) && placeholder_scan(r.extracted, cfg);
    r.empty_flag = is_blank(r.extracted) || r.placeholder_only;
    return r;
}

double empty_ratio(const std::vector<ResponseRecord>& records) {
    if (records.empty()) throw input_error("empty ratio of zero records");
    const auto empty = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.empty_flag; });
    return static_cast<double>(empty) / static_cast<double>(records.size());
}

bool stop_predicate(double ratio) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw input_error("empty ratio outside [0,1]: " + std::to_string(ratio));
    return ratio <= kStopEmptyRatio;
}

bool stop_predicate(std::size_t empty, std::size_t total) {
    if (total == 0 || empty > total) throw input_error("invalid empty/total counts");
    return 100 * empty <= total;
}

std::vector<ResponseRecord> read_responses(const std::filesystem::path& path, std::optional<std::string_view> hint,
                                           const PlaceholderConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open responses " + path.string());
    std::vector<ResponseRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        try {
            const json obj = json::parse(line);
            out.push_back(make_record(obj.at("benchmark").get<std::string>(), obj.at("response").get<std::string>(), hint, cfg));
        } catch (const json::exception& e) {
            throw input_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

json record_json(const ResponseRecord& r) {
    return {{"benchmark", r.benchmark},
            {"response", r.response},
            {"extracted", r.extracted},
            {"placeholder_only", r.placeholder_only},
            {"empty", r.empty_flag}};
}

}  // namespace codebpc
