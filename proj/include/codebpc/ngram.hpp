#pragma once

#include "codebpc/document.hpp"
#include "codebpc/tokenizer.hpp"
#include "codebpc/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace codebpc {

using TokenId = std::uint32_t;

/// Add-alpha smoothed n-gram model conditioning on at most order-1 previous tokens.
/// Id 0 is the reserved unknown symbol; out-of-vocabulary tokens map to it.
///
///   p(w | c) = (count(c, w) + alpha) / (count(c) + alpha * |V|)
///
/// where c is the available context (up to order-1 tokens) and |V| includes the
/// unknown symbol. Contexts never seen in training therefore give 1/|V|.
/// Immutable after construction; safe for concurrent readers.
class NGramModel {
public:
    static constexpr TokenId kUnk = 0;
    static constexpr std::string_view kUnkSymbol = "\xEF\xBF\xBF<unk>";

    /// Throws config_error for order < 1 or alpha <= 0; input_error for an empty corpus.
    static NGramModel train(const CorpusManifest& corpus, std::size_t order, double alpha,
                            Segmentation seg = Segmentation::chars);
    static NGramModel train(const std::vector<std::vector<std::string>>& token_docs, std::size_t order, double alpha,
                            Segmentation seg = Segmentation::chars);

    /// Model with no counts: every prediction is 1/|V| where |V| = symbols.size() + 1.
    static NGramModel uniform(std::vector<std::string> symbols, Segmentation seg = Segmentation::chars);

    std::size_t order() const noexcept { return order_; }
    double alpha() const noexcept { return alpha_; }
    Segmentation segmentation() const noexcept { return seg_; }
    std::size_t vocab_size() const noexcept { return vocab_.size(); }
    const std::string& symbol(TokenId id) const { return vocab_.at(id); }

    TokenId id_of(std::string_view token) const;
    std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
    std::vector<TokenId> encode_text(std::string_view text) const;

    /// Uses the last min(order-1, context.size()) tokens of `context`.
    double prob(TokenId next, std::span<const TokenId> context) const;
    double logprob(TokenId next, std::span<const TokenId> context) const;
    /// Most probable next token (lowest id on ties).
    TokenId argmax(std::span<const TokenId> context) const;

    std::uint64_t context_count(std::span<const TokenId> context) const;
    std::uint64_t joint_count(std::span<const TokenId> context, TokenId next) const;

    void save(const std::filesystem::path& path, const std::string& config_hash = {}) const;
    static NGramModel load(const std::filesystem::path& path);

private:
    NGramModel(std::size_t order, double alpha, Segmentation seg);
    std::span<const TokenId> effective(std::span<const TokenId> context) const;
    TokenId intern(const std::string& token);
    void count_document(const std::vector<TokenId>& ids);

    std::size_t order_ = 1;
    double alpha_ = 1.0;
    Segmentation seg_ = Segmentation::chars;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> index_;
    std::unordered_map<std::string, std::uint64_t> context_counts_;
    std::unordered_map<std::string, std::uint64_t> joint_counts_;
    std::unordered_map<std::string, std::vector<std::pair<TokenId, std::uint64_t>>> successors_;
};

/// Log-probabilities (nats) for every token, each conditioned on up to
/// min(order-1, i, context_limit-1) preceding tokens. context_limit = nullopt is unlimited.
std::vector<double> ngram_logprob(const NGramModel& model, std::span<const TokenId> tokens,
                                  std::optional<std::size_t> context_limit = std::nullopt);

/// Trace over every document of `corpus`, segmented with the model's segmentation.
LogProbTrace ngram_trace(const NGramModel& model, const CorpusManifest& corpus, std::string model_name,
                         std::optional<std::size_t> context_limit = std::nullopt);

}  // namespace codebpc
