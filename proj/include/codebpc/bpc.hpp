#pragma once

#include "codebpc/document.hpp"
#include "codebpc/ngram.hpp"
#include "codebpc/trace.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace codebpc {

/// How tokens past the last full stride-aligned window are covered.
enum class TailPolicy {
    anchor_end,  ///< one extra full window ending at the last token
    shrink,      ///< one extra window starting at the next stride position, shorter than W
};

std::string_view tail_policy_name(TailPolicy t) noexcept;
TailPolicy parse_tail_policy(std::string_view name);

struct WindowConfig {
    std::size_t window = 0;  ///< W, tokens fed per request
    std::size_t stride = 0;  ///< V, tokens advanced between requests
    TailPolicy tail = TailPolicy::anchor_end;

    /// V = max(1, floor(W / 4)).
    static WindowConfig with_default_stride(std::size_t window, TailPolicy tail = TailPolicy::anchor_end);
    /// Throws config_error unless 1 <= V <= W.
    void validate() const;
};

/// One model request: tokens [context_start, score_end) are fed and positions
/// [score_begin, score_end) are scored.
struct ScoredSpan {
    std::size_t context_start = 0;
    std::size_t score_begin = 0;
    std::size_t score_end = 0;

    bool operator==(const ScoredSpan&) const = default;
};

/// Request schedule of the sliding-window protocol. The first window scores all of
/// [0, min(W, length)); each later window at t = V, 2V, ... with t + W <= length
/// scores [t + W - V, t + W); the tail policy covers any remaining suffix. Spans are
/// in ascending position order and cover every index exactly once.
std::vector<ScoredSpan> window_schedule(std::size_t length, const WindowConfig& cfg);

/// Disjoint chunks [cW, (c+1)W), each scored with its context reset.
std::vector<ScoredSpan> truncated_schedule(std::size_t length, std::size_t window);

/// W - V: the fewest in-window predecessors of any scored token outside the first window.
std::size_t min_context_per_scored_token(const WindowConfig& cfg);
/// Mean in-window predecessors over the scored positions of one non-initial window,
/// (2W - V - 1) / 2; with V = W/4 this is (7/8)W - 1/2.
double mean_context_per_scored_token(const WindowConfig& cfg);

/// One document as seen by the evaluator.
struct EvalDocument {
    std::string doc_id;
    std::vector<std::uint32_t> char_lens;
    std::size_t char_count = 0;

    std::size_t size() const noexcept { return char_lens.size(); }
};

/// Supplier of per-token natural-log probabilities.
class LogProbSource {
public:
    virtual ~LogProbSource() = default;
    virtual const std::vector<EvalDocument>& documents() const = 0;
    /// Writes ln p(x_i | x_[context_start, i)) for i in [score_begin, score_end) into out.
    virtual void score(std::size_t doc, const ScoredSpan& span, std::span<double> out) const = 0;
    /// True when the source honours span.context_start (a model); false for replayed
    /// values whose context was fixed by the producer.
    virtual bool conditions_on_window() const = 0;
    /// Producer window for replayed values; 0 means full prefix.
    virtual std::size_t producer_window() const { return 0; }
    virtual std::string describe() const = 0;
};

/// N-gram model evaluated over a manifest (segmented with the model's segmentation).
class NGramSource final : public LogProbSource {
public:
    NGramSource(const NGramModel& model, const CorpusManifest& corpus);
    NGramSource(const NGramModel& model, std::vector<std::pair<std::string, std::vector<std::string>>> token_docs);

    const std::vector<EvalDocument>& documents() const override { return docs_; }
    void score(std::size_t doc, const ScoredSpan& span, std::span<double> out) const override;
    bool conditions_on_window() const override { return true; }
    std::string describe() const override;

private:
    const NGramModel* model_;
    std::vector<EvalDocument> docs_;
    std::vector<std::vector<TokenId>> ids_;
};

/// Replays a loaded trace. With a corpus, evaluation follows the corpus documents and
/// each must be fully covered by the trace.
class TraceSource final : public LogProbSource {
public:
    explicit TraceSource(LogProbTrace trace, const CorpusManifest* corpus = nullptr);

    const std::vector<EvalDocument>& documents() const override { return docs_; }
    void score(std::size_t doc, const ScoredSpan& span, std::span<double> out) const override;
    bool conditions_on_window() const override { return false; }
    std::size_t producer_window() const override { return trace_.context_window_used; }
    std::string describe() const override;

private:
    LogProbTrace trace_;
    std::vector<EvalDocument> docs_;
    std::vector<const DocumentTrace*> rows_;
};

enum class BpcMode { sliding, full, truncated };
std::string_view bpc_mode_name(BpcMode m) noexcept;
BpcMode parse_bpc_mode(std::string_view name);

struct DocumentBpc {
    std::string doc_id;
    std::size_t chars = 0;   // M
    std::size_t tokens = 0;  // N
    double loss_bits = 0.0;
    double bpc_bits = 0.0;
};

struct BpcReport {
    BpcMode mode = BpcMode::sliding;
    std::optional<WindowConfig> cfg;
    std::string source;
    std::size_t chars = 0;   // M
    std::size_t tokens = 0;  // N
    double loss_bits = 0.0;  // sum of -log2 p over scored tokens
    double r1_bits = 0.0;    // loss_bits / N
    double r2 = 0.0;         // N / M
    double bpc_bits = 0.0;   // loss_bits / M
    std::vector<DocumentBpc> per_document;  ///< ascending doc_id
};

/// Sliding-window BPC pooled over all documents (sum of losses / sum of characters).
BpcReport sliding_window_bpc(const LogProbSource& src, const WindowConfig& cfg, std::size_t workers = 1);
/// Every token conditioned on its whole prefix. Throws compute_error("oracle unavailable")
/// for a windowed trace that cannot supply full-prefix values.
BpcReport full_context_bpc(const LogProbSource& src, std::size_t workers = 1);
/// Baseline with the sequence cut into disjoint W-token chunks.
BpcReport truncated_bpc(const LogProbSource& src, std::size_t window, std::size_t workers = 1);

/// (R1 in bits/token, R2 in tokens/character).
std::pair<double, double> decompose_bpc(const BpcReport& report);

nlohmann::json bpc_report_json(const BpcReport& report, const std::string& config_hash = {});

}  // namespace codebpc
