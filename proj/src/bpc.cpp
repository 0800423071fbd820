#include "codebpc/bpc.hpp"

#include "codebpc/common.hpp"
#include "codebpc/unicode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace codebpc {

using nlohmann::json;

std::string_view tail_policy_name(TailPolicy t) noexcept {
    return t == TailPolicy::anchor_end ? "anchor_end" : "shrink";
}

TailPolicy parse_tail_policy(std::string_view name) {
    if (name == "anchor_end") return TailPolicy::anchor_end;
    if (name == "shrink") return TailPolicy::shrink;
    throw config_error("unknown tail policy '" + std::string(name) + "' (expected anchor_end or shrink)");
}

WindowConfig WindowConfig::with_default_stride(std::size_t window, TailPolicy tail) {
    return {window, std::max<std::size_t>(1, window / 4), tail};
}

void WindowConfig::validate() const {
    if (window < 1) throw config_error("window must be >= 1");
    if (stride < 1) throw config_error("stride must be >= 1");
    if (stride > window)
        throw config_error("stride V=" + std::to_string(stride) + " exceeds window W=" + std::to_string(window));
}

std::vector<ScoredSpan> window_schedule(std::size_t length, const WindowConfig& cfg) {
    cfg.validate();
    const std::size_t w = cfg.window, v = cfg.stride;
    std::vector<ScoredSpan> spans;
    if (length == 0) return spans;
    if (length <= w) {
        spans.push_back({0, 0, length});
        return spans;
    }
    spans.push_back({0, 0, w});
    std::size_t covered = w;
    std::size_t t = v;
    for (; t + w <= length; t += v) {
        spans.push_back({t, t + w - v, t + w});
        covered = t + w;
    }
    if (covered < length) {
        const std::size_t start = cfg.tail == TailPolicy::anchor_end ? length - w : t;
        spans.push_back({start, covered, length});
    }
    return spans;
}

std::vector<ScoredSpan> truncated_schedule(std::size_t length, std::size_t window) {
    if (window < 1) throw config_error("window must be >= 1");
    std::vector<ScoredSpan> spans;
    for (std::size_t c = 0; c < length; c += window) spans.push_back({c, c, std::min(c + window, length)});
    return spans;
}

std::size_t min_context_per_scored_token(const WindowConfig& cfg) {
    cfg.validate();
    return cfg.window - cfg.stride;
}

double mean_context_per_scored_token(const WindowConfig& cfg) {
    cfg.validate();
    return (2.0 * static_cast<double>(cfg.window) - static_cast<double>(cfg.stride) - 1.0) / 2.0;
}

NGramSource::NGramSource(const NGramModel& model, const CorpusManifest& corpus) : model_(&model) {
    docs_.resize(corpus.size());
    ids_.resize(corpus.size());
    for (std::size_t k = 0; k < corpus.size(); ++k) {
        const auto& d = corpus.documents()[k];
        const auto pieces = segment(d.content, model.segmentation());
        docs_[k].doc_id = d.doc_id;
        docs_[k].char_count = d.char_count;
        docs_[k].char_lens.reserve(pieces.size());
        for (const auto& p : pieces) docs_[k].char_lens.push_back(static_cast<std::uint32_t>(utf8::scalar_count(p)));
        ids_[k] = model.encode(pieces);
    }
}

NGramSource::NGramSource(const NGramModel& model, std::vector<std::pair<std::string, std::vector<std::string>>> token_docs)
    : model_(&model) {
    std::sort(token_docs.begin(), token_docs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [id, toks] : token_docs) {
        EvalDocument d;
        d.doc_id = id;
        for (const auto& t : toks) {
            d.char_lens.push_back(static_cast<std::uint32_t>(utf8::scalar_count(t)));
            d.char_count += d.char_lens.back();
        }
        docs_.push_back(std::move(d));
        ids_.push_back(model.encode(toks));
    }
}

void NGramSource::score(std::size_t doc, const ScoredSpan& span, std::span<double> out) const {
    const auto& ids = ids_.at(doc);
    const std::span<const TokenId> all(ids);
    const std::size_t reach = model_->order() - 1;
    for (std::size_t i = span.score_begin; i < span.score_end; ++i) {
        const std::size_t len = std::min(reach, i - span.context_start);
        out[i - span.score_begin] = model_->logprob(ids[i], all.subspan(i - len, len));
    }
}

std::string NGramSource::describe() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "ngram(order=%zu, alpha=%g, segmentation=%s)", model_->order(), model_->alpha(),
                  std::string(segmentation_name(model_->segmentation())).c_str());
    return buf;
}

TraceSource::TraceSource(LogProbTrace trace, const CorpusManifest* corpus) : trace_(std::move(trace)) {
    auto add = [&](const DocumentTrace& row, std::size_t char_count) {
        EvalDocument d;
        d.doc_id = row.doc_id;
        d.char_lens = row.char_lens;
        d.char_count = char_count;
        docs_.push_back(std::move(d));
        rows_.push_back(&row);
    };
    if (corpus) {
        for (const auto& doc : corpus->documents()) {
            const DocumentTrace* row = trace_.find(doc.doc_id);
            if (!row) throw input_error("trace shorter than token sequence: no events for '" + doc.doc_id + "'");
            if (row->char_count() != doc.char_count)
                throw input_error("trace shorter than token sequence: '" + doc.doc_id + "' events cover " +
                                  std::to_string(row->char_count()) + " of " + std::to_string(doc.char_count) +
                                  " characters");
            add(*row, doc.char_count);
        }
    } else {
        std::sort(trace_.documents.begin(), trace_.documents.end(),
                  [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
        for (const auto& row : trace_.documents) add(row, row.char_count());
    }
}

void TraceSource::score(std::size_t doc, const ScoredSpan& span, std::span<double> out) const {
    const auto& lp = rows_.at(doc)->logprobs;
    if (span.score_end > lp.size()) throw compute_error("trace shorter than token sequence for '" + docs_[doc].doc_id + "'");
    std::copy(lp.begin() + static_cast<std::ptrdiff_t>(span.score_begin),
              lp.begin() + static_cast<std::ptrdiff_t>(span.score_end), out.begin());
}

std::string TraceSource::describe() const {
    return "trace(" + trace_.model_name + ", window=" + std::to_string(trace_.context_window_used) + ")";
}

std::string_view bpc_mode_name(BpcMode m) noexcept {
    switch (m) {
        case BpcMode::sliding: return "sliding";
        case BpcMode::full: return "full";
        case BpcMode::truncated: return "truncated";
    }
    return "sliding";
}

BpcMode parse_bpc_mode(std::string_view name) {
    if (name == "sliding") return BpcMode::sliding;
    if (name == "full") return BpcMode::full;
    if (name == "truncated") return BpcMode::truncated;
    throw config_error("unknown bpc mode '" + std::string(name) + "' (sliding|full|truncated)");
}

namespace {

template <typename Schedule>
BpcReport evaluate(const LogProbSource& src, BpcMode mode, std::optional<WindowConfig> cfg, std::size_t workers,
                   Schedule&& schedule) {
    const auto& docs = src.documents();
    std::vector<DocumentBpc> rows(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t k) {
        const EvalDocument& d = docs[k];
        CompensatedSum loss;
        std::vector<double> buf;
        for (const ScoredSpan& span : schedule(d.size())) {
            buf.resize(span.score_end - span.score_begin);
            src.score(k, span, buf);
            for (double lp : buf) loss.add(-lp / std::numbers::ln2);
        }
        DocumentBpc& r = rows[k];
        r.doc_id = d.doc_id;
        r.chars = d.char_count;
        r.tokens = d.size();
        r.loss_bits = loss.value();
        r.bpc_bits = r.chars > 0 ? r.loss_bits / static_cast<double>(r.chars) : 0.0;
    });

    BpcReport report;
    report.mode = mode;
    report.cfg = cfg;
    report.source = src.describe();
    CompensatedSum total;
    for (const auto& r : rows) {
        report.chars += r.chars;
        report.tokens += r.tokens;
        total.add(r.loss_bits);
    }
    if (report.tokens == 0 || report.chars == 0) throw compute_error("empty evaluation: no tokens or characters to score");
    report.loss_bits = total.value();
    report.r1_bits = report.loss_bits / static_cast<double>(report.tokens);
    report.r2 = static_cast<double>(report.tokens) / static_cast<double>(report.chars);
    report.bpc_bits = report.loss_bits / static_cast<double>(report.chars);
    report.per_document = std::move(rows);
    return report;
}

std::size_t longest(const LogProbSource& src) {
    std::size_t n = 0;
    for (const auto& d : src.documents()) n = std::max(n, d.size());
    return n;
}

}  // namespace

BpcReport sliding_window_bpc(const LogProbSource& src, const WindowConfig& cfg, std::size_t workers) {
    cfg.validate();
    if (!src.conditions_on_window()) {
        const std::size_t pw = src.producer_window();
        const bool same_window = pw == cfg.window;
        const bool trivially_full = pw == 0 && longest(src) <= cfg.window;
        if (!same_window && !trivially_full)
            throw config_error("trace was produced with window " + std::to_string(pw) +
                               "; replay requires the requested window " + std::to_string(cfg.window));
    }
    return evaluate(src, BpcMode::sliding, cfg, workers, [&](std::size_t n) { return window_schedule(n, cfg); });
}

BpcReport full_context_bpc(const LogProbSource& src, std::size_t workers) {
    if (!src.conditions_on_window()) {
        const std::size_t pw = src.producer_window();
        if (pw != 0 && longest(src) > pw)
            throw compute_error("oracle unavailable: trace window " + std::to_string(pw) +
                                " is shorter than the longest document (" + std::to_string(longest(src)) + " tokens)");
    }
    return evaluate(src, BpcMode::full, std::nullopt, workers, [](std::size_t n) {
        return n == 0 ? std::vector<ScoredSpan>{} : std::vector<ScoredSpan>{{0, 0, n}};
    });
}

BpcReport truncated_bpc(const LogProbSource& src, std::size_t window, std::size_t workers) {
    if (window < 1) throw config_error("window must be >= 1");
    if (!src.conditions_on_window()) {
        const std::size_t pw = src.producer_window();
        if (!(longest(src) <= window && (pw == 0 || longest(src) <= pw)))
            throw config_error("truncated evaluation needs a model source; replayed trace values carry a fixed context");
    }
    WindowConfig cfg{window, window, TailPolicy::anchor_end};
    return evaluate(src, BpcMode::truncated, cfg, workers, [&](std::size_t n) { return truncated_schedule(n, window); });
}

std::pair<double, double> decompose_bpc(const BpcReport& report) { return {report.r1_bits, report.r2}; }

json bpc_report_json(const BpcReport& report, const std::string& config_hash) {
    json docs = json::array();
    for (const auto& d : report.per_document)
        docs.push_back({{"doc_id", d.doc_id}, {"M", d.chars}, {"N", d.tokens}, {"loss_bits", d.loss_bits}, {"bpc", d.bpc_bits}});
    json cfg = nullptr;
    if (report.cfg)
        cfg = {{"window", report.cfg->window},
               {"stride", report.cfg->stride},
               {"tail_policy", tail_policy_name(report.cfg->tail)}};
    return {{"kind", "bpc_report"},
            {"tool_version", kToolVersion},
            {"config_hash", config_hash},
            {"mode", bpc_mode_name(report.mode)},
            {"config", cfg},
            {"source", report.source},
            {"M", report.chars},
            {"N", report.tokens},
            {"loss_bits", report.loss_bits},
            {"R1", report.r1_bits},
            {"R2", report.r2},
            {"BPC", report.bpc_bits},
            {"per_document", docs}};
}

}  // namespace codebpc
