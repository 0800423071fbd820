#pragma once

#include "codebpc/document.hpp"
#include "codebpc/filters.hpp"
#include "codebpc/minhash.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace codebpc {

/// A document as ingested, before any filtering. created_at_text keeps the raw
/// sidecar value so malformed dates surface as timestamp-stage rejections.
struct IngestedDocument {
    CodeDocument doc;
    std::optional<std::string> created_at_text;
};

/// Language label from a file extension ("py" -> "Python"); empty when unknown.
std::string language_for_path(const std::filesystem::path& path);

/// Reads every regular file under `input` (a directory, or an uncompressed POSIX
/// tar archive). doc_id is the '/'-separated relative path. The optional sidecar is
/// JSON Lines keyed by "path" (or "doc_id") carrying repo_id, language, created_at.
/// Files with unknown extensions and no sidecar language are skipped.
std::vector<IngestedDocument> ingest(const std::filesystem::path& input,
                                     const std::optional<std::filesystem::path>& sidecar = std::nullopt);

struct SampleTarget {
    std::map<std::string, double> fractions;
    std::uint64_t total_tokens = 0;
};

struct CorpusBuildConfig {
    std::size_t min_tokens = kDefaultMinTokens;
    std::optional<TimeWindow> window;
    BoilerplateConfig boilerplate;
    std::vector<LineRatioRule> quality_rules;
    bool dedup = true;
    DedupConfig dedup_cfg;
    std::optional<SampleTarget> sample;
    std::uint64_t seed = 0x5eed;
    std::size_t workers = 1;
};

struct StageAttrition {
    std::string stage;
    std::size_t in = 0;
    std::size_t out = 0;
};

struct Rejection {
    std::string doc_id;
    std::string stage;
    std::string reason;
};

struct CorpusBuildResult {
    CorpusManifest manifest;
    std::vector<StageAttrition> attrition;
    std::vector<Rejection> rejections;  ///< sorted by (stage order, doc_id)
};

/// Runs strip -> min-tokens -> timestamp -> quality rules -> dedup -> sampling.
/// The surviving set does not depend on input order.
CorpusBuildResult build_corpus(std::vector<IngestedDocument> input, const CorpusBuildConfig& cfg);

/// Counts, per-language fractions and per-stage attrition.
nlohmann::json corpus_summary(const CorpusBuildResult& result, const std::string& config_hash);
nlohmann::json manifest_stats(const CorpusManifest& manifest);

}  // namespace codebpc
