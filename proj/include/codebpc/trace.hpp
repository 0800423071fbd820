#pragma once

#include "codebpc/document.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc {

struct TokenEvent {
    std::string doc_id;
    std::size_t token_index = 0;
    std::uint32_t char_len = 0;
    double logprob_nats = 0.0;  ///< natural log, <= 0
    bool special = false;       ///< only special tokens may cover zero characters
};

/// Events of one document, indexed by token position.
struct DocumentTrace {
    std::string doc_id;
    std::vector<std::uint32_t> char_lens;
    std::vector<double> logprobs;
    std::vector<bool> special;

    std::size_t size() const noexcept { return logprobs.size(); }
    std::size_t char_count() const noexcept;
};

struct LogProbTrace {
    std::string model_name;
    /// Context window of the producer in tokens; 0 means every event is conditioned
    /// on its entire prefix.
    std::size_t context_window_used = 0;
    std::vector<DocumentTrace> documents;  ///< ascending doc_id
    std::string config_hash;

    const DocumentTrace* find(std::string_view doc_id) const;
};

/// JSON Lines: header object, then one TokenEvent per line grouped by document in
/// doc_id order. Output is byte-identical for identical input.
std::string trace_to_jsonl(const LogProbTrace& trace);
void write_trace(const LogProbTrace& trace, const std::filesystem::path& path);

/// Parses and validates a trace: logprob finite and <= 0, char_len >= 0 (0 only when
/// special), token_index contiguous from 0 per document, and per-document character
/// sums equal to both the header's declared char_counts (if any) and `corpus` (if
/// given). Every error message names the offending line.
LogProbTrace parse_trace(std::string_view jsonl, const std::string& origin = "<memory>",
                         const CorpusManifest* corpus = nullptr);
LogProbTrace load_trace(const std::filesystem::path& path, const CorpusManifest* corpus = nullptr);

}  // namespace codebpc
