#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc {

using Date = std::chrono::year_month_day;

enum class DateBound { start, end };

/// Parses YYYY-MM-DD, or YYYY-MM which resolves to the first (start) or last (end)
/// day of the month. Throws input_error on malformed text.
Date parse_date(std::string_view text, DateBound bound = DateBound::start);
std::string format_date(Date d);

struct CodeDocument {
    std::string doc_id;
    std::string repo_id;
    std::string language;
    std::optional<Date> created_at;
    std::string content;
    std::size_t char_count = 0;
    std::size_t token_count = 0;

    /// Recomputes char_count and token_count from content.
    void refresh_counts();
};

CodeDocument make_document(std::string doc_id, std::string language, std::string content,
                           std::string repo_id = {}, std::optional<Date> created_at = std::nullopt);

/// Ordered document set with per-language token totals.
class CorpusManifest {
public:
    CorpusManifest() = default;
    /// Sorts by doc_id and recomputes totals; throws input_error on duplicate ids.
    explicit CorpusManifest(std::vector<CodeDocument> docs, std::vector<std::string> provenance = {});

    const std::vector<CodeDocument>& documents() const noexcept { return docs_; }
    const std::map<std::string, std::uint64_t>& language_tokens() const noexcept { return language_tokens_; }
    const std::vector<std::string>& provenance() const noexcept { return provenance_; }
    std::uint64_t total_tokens() const noexcept;
    std::size_t size() const noexcept { return docs_.size(); }
    bool empty() const noexcept { return docs_.empty(); }

    void add_note(std::string note) { provenance_.push_back(std::move(note)); }
    const CodeDocument* find(std::string_view doc_id) const;

private:
    std::vector<CodeDocument> docs_;
    std::map<std::string, std::uint64_t> language_tokens_;
    std::vector<std::string> provenance_;
};

/// Artifact stamp written into every output header.
struct ArtifactMeta {
    std::string config_hash;
};

/// JSON Lines: one header object, then one record per document in doc_id order.
void write_manifest(const CorpusManifest& m, const std::filesystem::path& path, const ArtifactMeta& meta = {});
std::string manifest_to_jsonl(const CorpusManifest& m, const ArtifactMeta& meta = {});

/// Validates counts, ordering and totals; errors carry the 1-based line number.
CorpusManifest read_manifest(const std::filesystem::path& path);
CorpusManifest parse_manifest(std::string_view jsonl, const std::string& origin = "<memory>");

}  // namespace codebpc
