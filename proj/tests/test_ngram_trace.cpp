#include "doctest.h"

#include "codebpc/common.hpp"
#include "codebpc/ngram.hpp"
#include "codebpc/trace.hpp"
#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>

using namespace codebpc;
using Tokens = std::vector<std::string>;

namespace {

// Oracle: brute-force add-alpha estimate by scanning the training tokens directly.
double oracle_prob(const std::vector<Tokens>& docs, std::size_t order, double alpha, std::size_t vocab,
                   const Tokens& history, const std::string& next) {
    const std::size_t len = std::min(order - 1, history.size());
    const Tokens ctx(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
    double c_ctx = 0.0, c_joint = 0.0;
    for (const auto& d : docs)
        for (std::size_t i = len; i < d.size(); ++i) {
            if (!std::equal(ctx.begin(), ctx.end(), d.begin() + static_cast<std::ptrdiff_t>(i - len))) continue;
            c_ctx += 1.0;
            if (d[i] == next) c_joint += 1.0;
        }
    return (c_joint + alpha) / (c_ctx + alpha * static_cast<double>(vocab));
}

Tokens chars(const std::string& s) { return segment(s, Segmentation::chars); }

CorpusManifest small_corpus() {
    return CorpusManifest({make_document("a", "Python", "def f(x):\n    return x\n"),
                           make_document("b", "Python", "print(f(1))\n")});
}

std::string replace_once(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("add-alpha estimate on a hand-computed sequence") {
    const double alpha = 0.5;
    const auto m = NGramModel::train(std::vector<Tokens>{chars("abab")}, 2, alpha);
    REQUIRE(m.vocab_size() == 3);  // unk, a, b
    const std::vector<TokenId> ctx_a = {m.id_of("a")};
    CHECK(m.context_count(ctx_a) == 2);
    CHECK(m.joint_count(ctx_a, m.id_of("b")) == 2);
    CHECK(m.prob(m.id_of("b"), ctx_a) == doctest::Approx((2 + alpha) / (2 + alpha * 3)).epsilon(1e-15));
    CHECK(m.prob(m.id_of("a"), ctx_a) == doctest::Approx(alpha / (2 + alpha * 3)).epsilon(1e-15));
    // Empty context: unigram counts a=2, b=2 over 4 tokens.
    CHECK(m.prob(m.id_of("a"), {}) == doctest::Approx((2 + alpha) / (4 + alpha * 3)).epsilon(1e-15));
    CHECK(m.id_of("zzz") == NGramModel::kUnk);
}

TEST_CASE("unseen contexts and the uniform model") {
    const auto m = NGramModel::train(std::vector<Tokens>{chars("abcabd")}, 3, 1.0);
    const std::vector<TokenId> unseen = {m.id_of("d"), m.id_of("d")};
    for (TokenId w = 0; w < m.vocab_size(); ++w)
        CHECK(m.prob(w, unseen) == doctest::Approx(1.0 / static_cast<double>(m.vocab_size())).epsilon(1e-15));

    std::vector<std::string> bytes;
    for (int i = 0; i < 255; ++i) bytes.push_back("s" + std::to_string(i));
    const auto u = NGramModel::uniform(bytes);
    REQUIRE(u.vocab_size() == 256);
    CHECK(u.logprob(5, {}) == doctest::Approx(-std::log(256.0)).epsilon(1e-15));
}

TEST_CASE("errors on invalid training parameters") {
    CHECK_THROWS_AS(NGramModel::train(small_corpus(), 0, 1.0), Error);
    CHECK_THROWS_AS(NGramModel::train(small_corpus(), 2, 0.0), Error);
    CHECK_THROWS_AS(NGramModel::train(CorpusManifest{}, 2, 1.0), Error);
    CHECK_THROWS_AS(ngram_logprob(NGramModel::uniform({"a"}), std::vector<TokenId>{1}, 0), Error);
}

TEST_CASE("distributions normalize and depend only on the last order-1 tokens") {
    std::mt19937_64 rng(5);
    std::vector<Tokens> docs;
    for (int i = 0; i < 4; ++i) docs.push_back(chars(testing::random_text(rng, 200, "abcde")));
    for (std::size_t order = 1; order <= 4; ++order) {
        const auto m = NGramModel::train(docs, order, 0.3);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<TokenId> ctx;
            const auto len = rng() % 8;
            for (std::size_t i = 0; i < len; ++i) ctx.push_back(static_cast<TokenId>(rng() % m.vocab_size()));
            double total = 0.0;
            for (TokenId w = 0; w < m.vocab_size(); ++w) total += m.prob(w, ctx);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

            if (ctx.size() >= order) {
                auto perturbed = ctx;
                const std::size_t far = ctx.size() - order;  // outside the last order-1 tokens
                perturbed[far] = static_cast<TokenId>((perturbed[far] + 1) % m.vocab_size());
                for (TokenId w = 0; w < m.vocab_size(); ++w) CHECK(m.prob(w, perturbed) == m.prob(w, ctx));
            }
        }
    }
}

TEST_CASE("order-3 model matches brute-force counting on a 20-token fixture") {
    const std::vector<Tokens> docs = {
        {"x", "=", "x", "+", "1", ";", "y", "=", "x", "+", "x", ";", "x", "=", "y", "+", "1", ";", "y", "="}};
    const double alpha = 0.25;
    const auto m = NGramModel::train(docs, 3, alpha, Segmentation::lexical);
    REQUIRE(m.vocab_size() == 7);
    // c("x","+") = 2 followed by "1" and "x"; c("=","x") = 2 followed by "+" twice.
    CHECK(m.prob(m.id_of("x"), m.encode({"x", "+"})) == doctest::Approx((1 + alpha) / (2 + 7 * alpha)));
    CHECK(m.prob(m.id_of("+"), m.encode({"=", "x"})) == doctest::Approx((2 + alpha) / (2 + 7 * alpha)));
    const Tokens vocab = {"x", "=", "+", "1", ";", "y", "?"};
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        Tokens history;
        const auto len = rng() % 4;
        for (std::size_t i = 0; i < len; ++i) history.push_back(vocab[rng() % vocab.size()]);
        const auto& next = vocab[rng() % (vocab.size() - 1)];
        CHECK(m.prob(m.id_of(next), m.encode(history)) ==
              doctest::Approx(oracle_prob(docs, 3, alpha, 7, history, next)).epsilon(1e-14));
    }
}

TEST_CASE("ngram_logprob respects the context limit") {
    const auto m = NGramModel::train(std::vector<Tokens>{chars("abcabcabc")}, 3, 1.0);
    const auto ids = m.encode_text("abcab");
    const auto full = ngram_logprob(m, ids);
    const auto one = ngram_logprob(m, ids, 1);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        CHECK(one[i] == m.logprob(ids[i], {}));
        const std::size_t len = std::min<std::size_t>(2, i);
        CHECK(full[i] == m.logprob(ids[i], std::span<const TokenId>(ids).subspan(i - len, len)));
    }
}

TEST_CASE("model save and load preserve every probability") {
    const auto dir = testing::temp_dir("ngram");
    const auto m = NGramModel::train(small_corpus(), 3, 0.1, Segmentation::pairs);
    m.save(dir / "m.json");
    const auto r = NGramModel::load(dir / "m.json");
    CHECK(r.order() == 3);
    CHECK(r.alpha() == 0.1);
    CHECK(r.segmentation() == Segmentation::pairs);
    REQUIRE(r.vocab_size() == m.vocab_size());
    const auto ids = m.encode_text("def print(f(x))");
    CHECK(ngram_logprob(r, ids) == ngram_logprob(m, ids));
    std::ofstream(dir / "bad.json") << "{\"kind\":\"other\"}";
    CHECK_THROWS_AS(NGramModel::load(dir / "bad.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("trace round trip and validation") {
    const auto corpus = small_corpus();
    const auto model = NGramModel::train(corpus, 2, 1.0);
    auto trace = ngram_trace(model, corpus, "bigram");
    trace.config_hash = "abc123";
    const auto text = trace_to_jsonl(trace);

    SUBCASE("round trip is lossless and byte-identical") {
        const auto back = parse_trace(text, "t", &corpus);
        CHECK(back.model_name == "bigram");
        CHECK(back.config_hash == "abc123");
        REQUIRE(back.documents.size() == 2);
        CHECK(back.documents[0].logprobs == trace.documents[0].logprobs);
        CHECK(back.documents[1].char_lens == trace.documents[1].char_lens);
        CHECK(trace_to_jsonl(back) == text);
        CHECK(back.documents[0].char_count() == corpus.documents()[0].char_count);
    }
    SUBCASE("file round trip") {
        const auto dir = testing::temp_dir("trace");
        write_trace(trace, dir / "t.jsonl");
        CHECK(trace_to_jsonl(load_trace(dir / "t.jsonl", &corpus)) == text);
        CHECK_THROWS_AS(load_trace(dir / "missing.jsonl"), Error);
        std::filesystem::remove_all(dir);
    }
    SUBCASE("positive logprob is rejected with its line") {
        std::string bad = text;
        const auto pos = bad.find("\"logprob_nats\":-");
        bad.erase(pos + 15, 1);
        CHECK_THROWS_WITH_AS(parse_trace(bad, "t"), doctest::Contains("t:2:"), Error);
    }
    SUBCASE("truncated final line is a parse error naming the line") {
        std::string bad = text.substr(0, text.size() - 10);
        std::size_t lines = 0;
        for (char c : bad) lines += c == '\n';
        const std::string where = "t:" + std::to_string(lines + 1) + ":";
        CHECK_THROWS_WITH_AS(parse_trace(bad, "t"), doctest::Contains(where.c_str()), Error);
    }
    SUBCASE("character totals must match the corpus") {
        auto other = corpus.documents();
        other[0].content += "#";
        other[0].refresh_counts();
        const CorpusManifest changed(other);
        CHECK_THROWS_WITH_AS(parse_trace(text, "t", &changed), doctest::Contains("trace/corpus character mismatch"),
                             Error);
    }
    SUBCASE("token index gap is rejected") {
        const auto bad = replace_once(text, "\"token_index\":3}", "\"token_index\":4}");
        CHECK_THROWS_WITH_AS(parse_trace(bad, "t"), doctest::Contains("gap"), Error);
    }
    SUBCASE("zero-length non-special events are rejected") {
        const auto bad = replace_once(text, "\"char_len\":1,", "\"char_len\":0,");
        CHECK_THROWS_AS(parse_trace(bad, "t"), Error);
    }
}
