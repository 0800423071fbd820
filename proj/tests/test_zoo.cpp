#include "codebpc/common.hpp"
#include "codebpc/corpus.hpp"
#include "codebpc/zoo.hpp"

#include "doctest.h"

#include <set>

using namespace codebpc;

namespace {

CorpusManifest small_corpus(std::size_t documents = 40) {
    SyntheticCorpusConfig cfg;
    cfg.documents = documents;
    CorpusBuildConfig build;
    build.min_tokens = 32;
    return build_corpus(synthesize_corpus(cfg), build).manifest;
}

}  // namespace

TEST_CASE("synthetic corpus is deterministic and exercises every corpus stage") {
    SyntheticCorpusConfig cfg;
    cfg.documents = 60;
    const auto a = synthesize_corpus(cfg);
    const auto b = synthesize_corpus(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc.doc_id == b[i].doc.doc_id);
        CHECK(a[i].doc.content == b[i].doc.content);
    }
    std::set<std::string> languages;
    bool has_header = false, has_mirror = false;
    for (const auto& d : a) {
        languages.insert(d.doc.language);
        has_header = has_header || d.doc.content.find("Copyright") != std::string::npos;
        has_mirror = has_mirror || d.doc.doc_id.rfind("mirror/", 0) == 0;
    }
    CHECK(languages.size() == 2);
    CHECK(has_header);
    CHECK(has_mirror);

    cfg.seed = 8;
    const auto c = synthesize_corpus(cfg);
    bool differs = false;
    for (std::size_t i = 0; i < std::min(a.size(), c.size()); ++i) differs = differs || a[i].doc.content != c[i].doc.content;
    CHECK(differs);

    CorpusBuildConfig build;
    build.min_tokens = 32;
    const auto result = build_corpus(a, build);
    const auto& dedup = result.attrition.back();
    CHECK(dedup.stage == "dedup");
    CHECK(dedup.out < dedup.in);
    for (const auto& d : result.manifest.documents()) CHECK(d.content.find("Copyright") == std::string::npos);
}

TEST_CASE("held-out split is a deterministic partition") {
    const auto corpus = small_corpus();
    const auto [train, heldout] = split_heldout(corpus, 0.25, 7);
    CHECK(train.size() + heldout.size() == corpus.size());
    CHECK(train.size() > 0);
    CHECK(heldout.size() > 0);
    for (const auto& d : heldout.documents()) CHECK(train.find(d.doc_id) == nullptr);
    const auto [train2, heldout2] = split_heldout(corpus, 0.25, 7);
    CHECK(heldout2.size() == heldout.size());
    CHECK_THROWS_AS(split_heldout(corpus, 0.0, 7), Error);
}

TEST_CASE("anchor names round trip") {
    for (const auto a : {Anchor::any, Anchor::line_start, Anchor::after_open})
        CHECK(parse_anchor(anchor_name(a)) == a);
    CHECK_THROWS_AS(parse_anchor("middle"), Error);
}

TEST_CASE("instances are model independent and respect the anchor") {
    const auto corpus = small_corpus();
    const auto heldout = split_heldout(corpus, 0.5, 7).second;
    CompletionBenchmark bench{"generation", "next-line", 3, 30, Anchor::line_start};
    const auto a = sample_instances(heldout, Segmentation::chars, bench, 11);
    const auto b = sample_instances(heldout, Segmentation::chars, bench, 11);
    REQUIRE(a.size() == 30);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].doc == b[i].doc);
        CHECK(a[i].position == b[i].position);
        const auto& content = heldout.documents()[a[i].doc].content;
        REQUIRE(a[i].position > 0);
        CHECK(content[a[i].position] != ' ');
        const auto line = content.rfind('\n', a[i].position - 1);
        REQUIRE(line != std::string::npos);
        CHECK(content.find_first_not_of(' ', line + 1) == a[i].position);
        CHECK(a[i].position + bench.span_tokens <= content.size());
    }
    bench.instances = 1000000;
    CHECK_THROWS_AS(sample_instances(heldout, Segmentation::chars, bench, 11), Error);
}

TEST_CASE("higher-order models complete more spans and alpha does not change greedy output") {
    const auto corpus = small_corpus(80);
    const auto [train, heldout] = split_heldout(corpus, 0.25, 7);
    const auto suite = default_completion_suite();
    CHECK(suite.size() == 8);
    auto c_of = [&](std::size_t order, double alpha) {
        const auto model = NGramModel::train(train, order, alpha, Segmentation::chars);
        return composite_score(run_completion_suite(model, heldout, suite, 7, 2)).c;
    };
    const double c1 = c_of(1, 1.0), c4 = c_of(4, 1.0);
    CHECK(c4 > c1);
    CHECK(c_of(3, 0.01) == c_of(3, 1.0));

    const auto model = NGramModel::train(train, 2, 1.0, Segmentation::chars);
    const auto r1 = run_completion_suite(model, heldout, suite, 7, 1);
    const auto r4 = run_completion_suite(model, heldout, suite, 7, 4);
    REQUIRE(r1.size() == r4.size());
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i].score == r4[i].score);
}
