#include "codebpc/ngram.hpp"

#include "codebpc/common.hpp"
#include "codebpc/unicode.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace codebpc {

using nlohmann::json;

namespace {

std::string pack(std::span<const TokenId> ids) {
    std::string key(ids.size() * sizeof(TokenId), '\0');
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t b = 0; b < sizeof(TokenId); ++b)
            key[i * sizeof(TokenId) + b] = static_cast<char>((ids[i] >> (8 * b)) & 0xFF);
    return key;
}

std::string pack_joint(std::span<const TokenId> ctx, TokenId next) {
    std::string key = pack(ctx);
    const TokenId one[1] = {next};
    key += pack(one);
    return key;
}

std::vector<TokenId> unpack(std::string_view key) {
    std::vector<TokenId> ids(key.size() / sizeof(TokenId));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        TokenId v = 0;
        for (std::size_t b = 0; b < sizeof(TokenId); ++b)
            v |= static_cast<TokenId>(static_cast<unsigned char>(key[i * sizeof(TokenId) + b])) << (8 * b);
        ids[i] = v;
    }
    return ids;
}

}  // namespace

NGramModel::NGramModel(std::size_t order, double alpha, Segmentation seg) : order_(order), alpha_(alpha), seg_(seg) {
    if (order < 1) throw config_error("n-gram order must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw config_error("smoothing alpha must be > 0");
    vocab_.emplace_back(kUnkSymbol);
    index_.emplace(std::string(kUnkSymbol), kUnk);
}

TokenId NGramModel::intern(const std::string& token) {
    auto [it, inserted] = index_.try_emplace(token, static_cast<TokenId>(vocab_.size()));
    if (inserted) vocab_.push_back(token);
    return it->second;
}

void NGramModel::count_document(const std::vector<TokenId>& ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t max_ctx = std::min(order_ - 1, i);
        for (std::size_t len = 0; len <= max_ctx; ++len) {
            std::span<const TokenId> ctx(ids.data() + i - len, len);
            ++context_counts_[pack(ctx)];
            ++joint_counts_[pack_joint(ctx, ids[i])];
        }
    }
}

NGramModel NGramModel::train(const std::vector<std::vector<std::string>>& token_docs, std::size_t order, double alpha,
                             Segmentation seg) {
    NGramModel m(order, alpha, seg);
    std::size_t total = 0;
    for (const auto& doc : token_docs) total += doc.size();
    if (total == 0) throw input_error("cannot train an n-gram model on an empty corpus");
    // Vocabulary ids follow first appearance in document order.
    std::vector<std::vector<TokenId>> encoded;
    encoded.reserve(token_docs.size());
    for (const auto& doc : token_docs) {
        std::vector<TokenId> ids;
        ids.reserve(doc.size());
        for (const auto& t : doc) ids.push_back(m.intern(t));
        encoded.push_back(std::move(ids));
    }
    for (const auto& ids : encoded) m.count_document(ids);
    for (const auto& [key, count] : m.joint_counts_) {
        const std::string_view k(key);
        m.successors_[std::string(k.substr(0, k.size() - sizeof(TokenId)))].emplace_back(
            unpack(k.substr(k.size() - sizeof(TokenId)))[0], count);
    }
    for (auto& [key, succ] : m.successors_) std::sort(succ.begin(), succ.end());
    return m;
}

NGramModel NGramModel::train(const CorpusManifest& corpus, std::size_t order, double alpha, Segmentation seg) {
    if (order < 1) throw config_error("n-gram order must be >= 1");
    if (!(alpha > 0.0)) throw config_error("smoothing alpha must be > 0");
    if (corpus.empty()) throw input_error("cannot train an n-gram model on an empty corpus");
    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.size());
    for (const auto& d : corpus.documents()) docs.push_back(segment(d.content, seg));
    return train(docs, order, alpha, seg);
}

NGramModel NGramModel::uniform(std::vector<std::string> symbols, Segmentation seg) {
    NGramModel m(1, 1.0, seg);
    for (const auto& s : symbols) m.intern(s);
    return m;
}

TokenId NGramModel::id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> NGramModel::encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id_of(t));
    return ids;
}

std::vector<TokenId> NGramModel::encode_text(std::string_view text) const { return encode(segment(text, seg_)); }

std::span<const TokenId> NGramModel::effective(std::span<const TokenId> context) const {
    const std::size_t keep = std::min(order_ - 1, context.size());
    return context.subspan(context.size() - keep);
}

std::uint64_t NGramModel::context_count(std::span<const TokenId> context) const {
    auto it = context_counts_.find(pack(effective(context)));
    return it == context_counts_.end() ? 0 : it->second;
}

std::uint64_t NGramModel::joint_count(std::span<const TokenId> context, TokenId next) const {
    auto it = joint_counts_.find(pack_joint(effective(context), next));
    return it == joint_counts_.end() ? 0 : it->second;
}

double NGramModel::prob(TokenId next, std::span<const TokenId> context) const {
    const double v = static_cast<double>(vocab_.size());
    return (static_cast<double>(joint_count(context, next)) + alpha_) /
           (static_cast<double>(context_count(context)) + alpha_ * v);
}

double NGramModel::logprob(TokenId next, std::span<const TokenId> context) const {
    const double v = static_cast<double>(vocab_.size());
    return std::log(static_cast<double>(joint_count(context, next)) + alpha_) -
           std::log(static_cast<double>(context_count(context)) + alpha_ * v);
}

TokenId NGramModel::argmax(std::span<const TokenId> context) const {
    const TokenId fallback = vocab_.size() > 1 ? 1 : kUnk;
    auto it = successors_.find(pack(effective(context)));
    if (it == successors_.end()) return fallback;
    TokenId best = fallback;
    std::uint64_t best_count = 0;
    for (const auto& [id, count] : it->second)
        if (count > best_count || (count == best_count && id < best)) best = id, best_count = count;
    return best;
}

void NGramModel::save(const std::filesystem::path& path, const std::string& config_hash) const {
    std::vector<std::pair<std::vector<TokenId>, std::uint64_t>> rows;
    rows.reserve(joint_counts_.size());
    for (const auto& [key, count] : joint_counts_) rows.emplace_back(unpack(key), count);
    std::sort(rows.begin(), rows.end());
    json counts = json::array();
    for (const auto& [ids, count] : rows) counts.push_back({ids, count});
    json out = {{"kind", "ngram_model"},
                {"tool_version", kToolVersion},
                {"config_hash", config_hash},
                {"order", order_},
                {"alpha", alpha_},
                {"segmentation", segmentation_name(seg_)},
                {"vocab", vocab_},
                {"counts", counts}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw output_error("cannot write model " + path.string());
    f << out.dump() << '\n';
    if (!f) throw output_error("write failed for " + path.string());
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw input_error("cannot open model " + path.string());
    json in;
    try {
        in = json::parse(f);
        if (in.value("kind", "") != "ngram_model") throw input_error(path.string() + ": not an n-gram model file");
        NGramModel m(in.at("order").get<std::size_t>(), in.at("alpha").get<double>(),
                     parse_segmentation(in.at("segmentation").get<std::string>()));
        const auto vocab = in.at("vocab").get<std::vector<std::string>>();
        if (vocab.empty() || vocab[0] != kUnkSymbol) throw input_error(path.string() + ": vocabulary must start with <unk>");
        for (std::size_t i = 1; i < vocab.size(); ++i) m.intern(vocab[i]);
        for (const auto& row : in.at("counts")) {
            auto ids = row.at(0).get<std::vector<TokenId>>();
            const auto count = row.at(1).get<std::uint64_t>();
            if (ids.empty() || ids.size() > m.order_) throw input_error(path.string() + ": malformed count row");
            for (auto id : ids)
                if (id >= m.vocab_.size()) throw input_error(path.string() + ": token id out of range");
            const TokenId next = ids.back();
            ids.pop_back();
            m.joint_counts_[pack_joint(ids, next)] = count;
            m.context_counts_[pack(ids)] += count;
            m.successors_[pack(ids)].emplace_back(next, count);
        }
        for (auto& [key, succ] : m.successors_) std::sort(succ.begin(), succ.end());
        return m;
    } catch (const json::exception& e) {
        throw input_error(path.string() + ": " + e.what());
    }
}

std::vector<double> ngram_logprob(const NGramModel& model, std::span<const TokenId> tokens,
                                  std::optional<std::size_t> context_limit) {
    if (context_limit && *context_limit == 0) throw config_error("context limit must be >= 1");
    std::vector<double> out(tokens.size());
    const std::size_t reach = context_limit ? *context_limit - 1 : tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::size_t len = std::min({model.order() - 1, i, reach});
        out[i] = model.logprob(tokens[i], tokens.subspan(i - len, len));
    }
    return out;
}

LogProbTrace ngram_trace(const NGramModel& model, const CorpusManifest& corpus, std::string model_name,
                         std::optional<std::size_t> context_limit) {
    LogProbTrace trace;
    trace.model_name = std::move(model_name);
    trace.context_window_used = context_limit.value_or(0);
    trace.documents.resize(corpus.size());
    parallel_for(corpus.size(), default_workers(), [&](std::size_t k) {
        const auto& doc = corpus.documents()[k];
        const auto pieces = segment(doc.content, model.segmentation());
        DocumentTrace& d = trace.documents[k];
        d.doc_id = doc.doc_id;
        d.char_lens.reserve(pieces.size());
        for (const auto& p : pieces) d.char_lens.push_back(static_cast<std::uint32_t>(utf8::scalar_count(p)));
        d.logprobs = ngram_logprob(model, model.encode(pieces), context_limit);
        d.special.assign(pieces.size(), false);
    });
    return trace;
}

}  // namespace codebpc
