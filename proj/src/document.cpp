#include "codebpc/document.hpp"

#include "codebpc/common.hpp"
#include "codebpc/tokenizer.hpp"
#include "codebpc/unicode.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace codebpc {

using nlohmann::json;

namespace {

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date parse_date(std::string_view text, DateBound bound) {
    using namespace std::chrono;
    const auto fail = [&] { return input_error("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD or YYYY-MM)"); };
    int y = 0, m = 0, d = 0;
    if (text.size() == 7 && text[4] == '-') {
        if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m)) throw fail();
        const year_month ym{year{y}, month{static_cast<unsigned>(m)}};
        if (!ym.ok()) throw fail();
        if (bound == DateBound::start) return ym / day{1};
        return year_month_day{ym / last};
    }
    if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
        if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d))
            throw fail();
        const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
        if (!ymd.ok()) throw fail();
        return ymd;
    }
    throw fail();
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

void CodeDocument::refresh_counts() {
    char_count = utf8::scalar_count(content);
    token_count = count_tokens_simple(content);
}

CodeDocument make_document(std::string doc_id, std::string language, std::string content, std::string repo_id,
                           std::optional<Date> created_at) {
    CodeDocument d;
    d.doc_id = std::move(doc_id);
    d.language = std::move(language);
    d.content = std::move(content);
    d.repo_id = std::move(repo_id);
    d.created_at = created_at;
    d.refresh_counts();
    return d;
}

CorpusManifest::CorpusManifest(std::vector<CodeDocument> docs, std::vector<std::string> provenance)
    : docs_(std::move(docs)), provenance_(std::move(provenance)) {
    std::sort(docs_.begin(), docs_.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
    for (std::size_t i = 1; i < docs_.size(); ++i)
        if (docs_[i].doc_id == docs_[i - 1].doc_id) throw input_error("duplicate doc_id '" + docs_[i].doc_id + "'");
    for (const auto& d : docs_) language_tokens_[d.language] += d.token_count;
}

std::uint64_t CorpusManifest::total_tokens() const noexcept {
    std::uint64_t n = 0;
    for (const auto& [lang, count] : language_tokens_) n += count;
    return n;
}

const CodeDocument* CorpusManifest::find(std::string_view doc_id) const {
    auto it = std::lower_bound(docs_.begin(), docs_.end(), doc_id,
                               [](const CodeDocument& d, std::string_view id) { return d.doc_id < id; });
    return it != docs_.end() && it->doc_id == doc_id ? &*it : nullptr;
}

std::string manifest_to_jsonl(const CorpusManifest& m, const ArtifactMeta& meta) {
    std::ostringstream out;
    json header = {{"kind", "corpus_manifest"},
                   {"tool_version", kToolVersion},
                   {"config_hash", meta.config_hash},
                   {"documents", m.size()},
                   {"language_tokens", m.language_tokens()},
                   {"provenance", m.provenance()}};
    out << header.dump() << '\n';
    for (const auto& d : m.documents()) {
        json rec = {{"doc_id", d.doc_id},
                    {"repo_id", d.repo_id},
                    {"language", d.language},
                    {"created_at", d.created_at ? json(format_date(*d.created_at)) : json(nullptr)},
                    {"char_count", d.char_count},
                    {"token_count", d.token_count},
                    {"content", d.content}};
        out << rec.dump() << '\n';
    }
    return out.str();
}

void write_manifest(const CorpusManifest& m, const std::filesystem::path& path, const ArtifactMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write manifest " + path.string());
    out << manifest_to_jsonl(m, meta);
    if (!out) throw output_error("write failed for " + path.string());
}

CorpusManifest parse_manifest(std::string_view jsonl, const std::string& origin) {
    std::vector<CodeDocument> docs;
    std::vector<std::string> provenance;
    std::map<std::string, std::uint64_t> declared_totals;
    bool have_header = false;
    std::size_t line_no = 0;
    std::string last_id;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        std::string_view line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw input_error(where + "parse error: " + e.what());
        }
        try {
            if (!have_header) {
                if (obj.value("kind", "") != "corpus_manifest") throw input_error(where + "missing manifest header");
                provenance = obj.value("provenance", std::vector<std::string>{});
                declared_totals = obj.value("language_tokens", std::map<std::string, std::uint64_t>{});
                have_header = true;
                continue;
            }
            CodeDocument d;
            d.doc_id = obj.at("doc_id").get<std::string>();
            d.repo_id = obj.value("repo_id", "");
            d.language = obj.at("language").get<std::string>();
            if (obj.contains("created_at") && !obj["created_at"].is_null())
                d.created_at = parse_date(obj["created_at"].get<std::string>());
            d.content = obj.at("content").get<std::string>();
            d.refresh_counts();
            if (obj.at("char_count").get<std::size_t>() != d.char_count)
                throw input_error(where + "char_count does not match content for '" + d.doc_id + "'");
            if (obj.at("token_count").get<std::size_t>() != d.token_count)
                throw input_error(where + "token_count does not match content for '" + d.doc_id + "'");
            if (!last_id.empty() && d.doc_id <= last_id)
                throw input_error(where + "documents not in strictly ascending doc_id order at '" + d.doc_id + "'");
            last_id = d.doc_id;
            docs.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw input_error(where + e.what());
        } catch (const Error& e) {
            if (std::string_view(e.what()).starts_with(origin)) throw;
            throw input_error(where + e.what());
        }
    }
    if (!have_header) throw input_error(origin + ": empty manifest file");
    CorpusManifest m(std::move(docs), std::move(provenance));
    if (!declared_totals.empty() && declared_totals != m.language_tokens())
        throw input_error(origin + ": header language totals disagree with documents");
    return m;
}

CorpusManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), path.string());
}

}  // namespace codebpc
