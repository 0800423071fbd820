#include "doctest.h"

#include "codebpc/bpc.hpp"
#include "codebpc/common.hpp"
#include "codebpc/ngram.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace codebpc;
using Tokens = std::vector<std::string>;

namespace {

const std::string kAlphabet = "abcdefghij";

// Text with local structure so that longer contexts help.
std::string structured_text(std::mt19937_64& rng, std::size_t len) {
    std::string s;
    while (s.size() < len) {
        const char c = kAlphabet[rng() % kAlphabet.size()];
        s += c;
        s += static_cast<char>('a' + (c - 'a' + 1) % 10);
        if (rng() % 3 == 0) s += 'j';
    }
    s.resize(len);
    return s;
}

CorpusManifest structured_corpus(std::uint64_t seed, std::size_t docs, std::size_t len) {
    std::mt19937_64 rng(seed);
    std::vector<CodeDocument> out;
    for (std::size_t i = 0; i < docs; ++i)
        out.push_back(make_document("d" + std::to_string(i), "X", structured_text(rng, len + rng() % 17)));
    return CorpusManifest(out);
}

// Oracle: every token scored with its entire prefix by direct model calls.
double oracle_full_bits(const NGramModel& m, const CorpusManifest& corpus) {
    double bits = 0.0;
    for (const auto& d : corpus.documents()) {
        const auto ids = m.encode_text(d.content);
        for (std::size_t i = 0; i < ids.size(); ++i)
            bits -= std::log2(m.prob(ids[i], std::span<const TokenId>(ids).first(i)));
    }
    return bits;
}

// Oracle: coverage count per position for an arbitrary schedule.
std::vector<int> coverage(std::size_t length, const std::vector<ScoredSpan>& spans) {
    std::vector<int> hits(length, 0);
    for (const auto& s : spans)
        for (std::size_t i = s.score_begin; i < s.score_end; ++i) ++hits.at(i);
    return hits;
}

LogProbTrace constant_trace(std::size_t tokens, std::uint32_t chars_per_token, double bits_per_token,
                            std::size_t window = 0) {
    LogProbTrace t;
    t.model_name = "constant";
    t.context_window_used = window;
    DocumentTrace d;
    d.doc_id = "doc";
    d.char_lens.assign(tokens, chars_per_token);
    d.logprobs.assign(tokens, -bits_per_token * std::numbers::ln2);
    d.special.assign(tokens, false);
    t.documents.push_back(d);
    return t;
}

}  // namespace

TEST_CASE("window configuration") {
    CHECK(WindowConfig::with_default_stride(2048).stride == 512);
    CHECK(WindowConfig::with_default_stride(3).stride == 1);
    CHECK_THROWS_AS((WindowConfig{8, 9}).validate(), Error);
    CHECK_THROWS_AS((WindowConfig{8, 0}).validate(), Error);
    CHECK_THROWS_AS((WindowConfig{0, 0}).validate(), Error);
    CHECK_NOTHROW((WindowConfig{8, 8}).validate());
}

TEST_CASE("schedule of the documented example") {
    const auto spans = window_schedule(4096, {2048, 512});
    std::vector<std::size_t> starts;
    for (const auto& s : spans) starts.push_back(s.context_start);
    CHECK(starts == std::vector<std::size_t>{0, 512, 1024, 1536, 2048});
    CHECK(spans[0] == ScoredSpan{0, 0, 2048});
    CHECK(spans[1] == ScoredSpan{512, 2048, 2560});
    CHECK(spans[4] == ScoredSpan{2048, 3584, 4096});
}

TEST_CASE("schedules cover every position exactly once") {
    std::mt19937_64 rng(123);
    CHECK(window_schedule(0, {4, 2}).empty());
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t w = 1 + rng() % 64;
        const std::size_t v = 1 + rng() % w;
        const std::size_t len = rng() % 400;
        for (auto tail : {TailPolicy::anchor_end, TailPolicy::shrink}) {
            const WindowConfig cfg{w, v, tail};
            const auto spans = window_schedule(len, cfg);
            const auto hits = coverage(len, spans);
            CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
            for (std::size_t k = 0; k < spans.size(); ++k) {
                const auto& s = spans[k];
                CHECK(s.context_start <= s.score_begin);
                CHECK(s.score_begin < s.score_end);
                CHECK(s.score_end - s.context_start <= w);
                if (k > 0) CHECK(s.score_begin - s.context_start >= w - v);
                if (k > 0) CHECK(spans[k - 1].score_end == s.score_begin);
            }
        }
        const auto hits = coverage(len, truncated_schedule(len, w));
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
}

TEST_CASE("context statistics") {
    CHECK(min_context_per_scored_token({16, 4}) == 12);
    CHECK(min_context_per_scored_token({8, 8}) == 0);
    CHECK(mean_context_per_scored_token({8, 2}) == doctest::Approx(6.5));
    CHECK(mean_context_per_scored_token({2048, 512}) == doctest::Approx(7.0 / 8.0 * 2048 - 0.5));
}

TEST_CASE("uniform model over 256 symbols gives exactly 8 bits per character") {
    std::vector<std::string> symbols;
    for (int i = 0; i < 26; ++i) symbols.emplace_back(1, static_cast<char>('a' + i));
    for (int i = 26; i < 255; ++i) symbols.push_back("sym" + std::to_string(i));
    const auto model = NGramModel::uniform(symbols);
    REQUIRE(model.vocab_size() == 256);
    const auto corpus = CorpusManifest({make_document("a", "X", "thequickbrownfox"), make_document("b", "X", "zzz")});
    NGramSource src(model, corpus);
    CHECK(sliding_window_bpc(src, {4, 1}).bpc_bits == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(full_context_bpc(src).bpc_bits == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(truncated_bpc(src, 3).bpc_bits == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("full-context evaluation matches direct prefix scoring") {
    const auto corpus = structured_corpus(1, 5, 80);
    const auto model = NGramModel::train(corpus, 3, 0.5);
    NGramSource src(model, corpus);
    const auto r = full_context_bpc(src);
    CHECK(r.loss_bits == doctest::Approx(oracle_full_bits(model, corpus)).epsilon(1e-12));
    CHECK(r.chars == corpus.documents()[0].char_count + corpus.documents()[1].char_count +
                         corpus.documents()[2].char_count + corpus.documents()[3].char_count +
                         corpus.documents()[4].char_count);
}

TEST_CASE("sliding window equals full context when the window covers the model order") {
    const auto corpus = structured_corpus(2, 1, 64);
    const auto eval = CorpusManifest({make_document("e", "X", corpus.documents()[0].content.substr(0, 64))});
    REQUIRE(eval.documents()[0].char_count == 64);
    for (std::size_t order = 1; order <= 3; ++order) {
        const auto model = NGramModel::train(corpus, order, 0.2);
        NGramSource src(model, eval);
        const auto full = full_context_bpc(src);
        const auto slide = sliding_window_bpc(src, {16, 4});
        CHECK(std::abs(slide.bpc_bits - full.bpc_bits) <= 1e-12);
    }
    SUBCASE("and deviates when it does not") {
        const auto model = NGramModel::train(corpus, 6, 0.2);
        NGramSource src(model, eval);
        CHECK(std::abs(sliding_window_bpc(src, {4, 4}).bpc_bits - full_context_bpc(src).bpc_bits) > 1e-6);
    }
}

TEST_CASE("documents no longer than the window score as full context") {
    const auto corpus = structured_corpus(3, 4, 20);
    const auto model = NGramModel::train(corpus, 4, 1.0);
    NGramSource src(model, corpus);
    const auto full = full_context_bpc(src);
    for (std::size_t v : {1, 7, 40}) CHECK(sliding_window_bpc(src, {40, v}).loss_bits == full.loss_bits);
}

TEST_CASE("truncated baseline") {
    const auto corpus = structured_corpus(4, 6, 150);
    const auto model = NGramModel::train(corpus, 4, 0.1);
    NGramSource src(model, corpus);
    const auto trunc = truncated_bpc(src, 8);
    CHECK(trunc.bpc_bits >= sliding_window_bpc(src, {8, 2}).bpc_bits);
    CHECK(trunc.loss_bits == doctest::Approx(sliding_window_bpc(src, {8, 8, TailPolicy::shrink}).loss_bits).epsilon(1e-15));
    const auto even = CorpusManifest({make_document("e", "X", corpus.documents()[0].content.substr(0, 96))});
    NGramSource even_src(model, even);
    CHECK(truncated_bpc(even_src, 8).loss_bits == sliding_window_bpc(even_src, {8, 8}).loss_bits);
}

TEST_CASE("decomposition identity") {
    SUBCASE("hand-computed trace") {
        TraceSource src(constant_trace(100, 4, 2.0));
        const auto r = full_context_bpc(src);
        CHECK(r.tokens == 100);
        CHECK(r.chars == 400);
        const auto [r1, r2] = decompose_bpc(r);
        CHECK(r1 == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(r2 == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(r.bpc_bits == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("character and pair tokenizations of the same text under uniform models") {
        std::vector<std::string> chars, pairs;
        const std::string alpha = "abcdefghijklmno";  // 15 symbols, 16 with unk
        for (char a : alpha) {
            chars.emplace_back(1, a);
            for (char b : alpha) pairs.push_back(std::string{a, b});
        }
        const auto mc = NGramModel::uniform(chars, Segmentation::chars);
        const auto mp = NGramModel::uniform(std::vector<std::string>(pairs.begin(), pairs.begin() + 225),
                                            Segmentation::pairs);
        std::mt19937_64 rng(8);
        const auto corpus = CorpusManifest({make_document("a", "X", testing::random_text(rng, 200, alpha))});
        const auto rc = full_context_bpc(NGramSource(mc, corpus));
        const auto rp = full_context_bpc(NGramSource(mp, corpus));
        CHECK(rc.r1_bits == doctest::Approx(4.0));
        CHECK(rc.r2 == doctest::Approx(1.0));
        CHECK(rp.r1_bits == doctest::Approx(std::log2(226.0)));
        CHECK(rp.r2 == doctest::Approx(0.5));
        for (const auto& r : {rc, rp}) CHECK(r.bpc_bits == doctest::Approx(r.r1_bits * r.r2).epsilon(1e-14));
        CHECK(rp.r1_bits > rc.r1_bits);
        CHECK(rp.bpc_bits < rc.bpc_bits);
    }
}

TEST_CASE("trace replay") {
    const auto corpus = structured_corpus(5, 3, 60);
    const auto model = NGramModel::train(corpus, 3, 0.5);

    SUBCASE("full-prefix trace reproduces direct evaluation") {
        TraceSource src(ngram_trace(model, corpus, "m"), &corpus);
        NGramSource direct(model, corpus);
        CHECK(full_context_bpc(src).loss_bits == doctest::Approx(full_context_bpc(direct).loss_bits).epsilon(1e-15));
    }
    SUBCASE("windowed trace needs a matching window") {
        TraceSource src(ngram_trace(model, corpus, "m", 16), &corpus);
        CHECK_NOTHROW(sliding_window_bpc(src, {16, 4}));
        CHECK_THROWS_AS(sliding_window_bpc(src, {32, 8}), Error);
        CHECK_THROWS_WITH_AS(full_context_bpc(src), doctest::Contains("oracle unavailable"), Error);
        CHECK_THROWS_AS(truncated_bpc(src, 16), Error);
    }
    SUBCASE("trace shorter than the corpus is rejected") {
        auto trace = ngram_trace(model, corpus, "m");
        trace.documents.pop_back();
        CHECK_THROWS_WITH_AS(TraceSource(trace, &corpus), doctest::Contains("trace shorter than token sequence"), Error);
    }
}

TEST_CASE("results do not depend on the worker count") {
    const auto corpus = structured_corpus(6, 9, 120);
    const auto model = NGramModel::train(corpus, 4, 0.3);
    NGramSource src(model, corpus);
    const auto one = sliding_window_bpc(src, {16, 4}, 1);
    for (std::size_t w : {2, 3, 8}) {
        const auto many = sliding_window_bpc(src, {16, 4}, w);
        CHECK(many.loss_bits == one.loss_bits);
        CHECK(bpc_report_json(many).dump() == bpc_report_json(one).dump());
    }
}

TEST_CASE("empty evaluation is an error") {
    const auto model = NGramModel::uniform({"a"});
    NGramSource src(model, CorpusManifest{});
    CHECK_THROWS_AS(full_context_bpc(src), Error);
}
