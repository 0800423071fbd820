#include "doctest.h"

#include "codebpc/common.hpp"
#include "codebpc/corpus.hpp"
#include "codebpc/filters.hpp"
#include "codebpc/sampling.hpp"
#include "test_support.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

using namespace codebpc;
using testing::words;

namespace {

CodeDocument doc_with_tokens(std::string id, std::string lang, std::size_t tokens) {
    return make_document(std::move(id), std::move(lang), words(tokens));
}

}  // namespace

TEST_CASE("CodeDocument counts are recomputable") {
    auto d = make_document("a.py", "Python", "def f(x):\n    return x  # ok é\n");
    CHECK(d.char_count == 31);
    CHECK(d.token_count == 11);
}

TEST_CASE("filter_min_tokens boundary is strict") {
    CHECK_FALSE(filter_min_tokens(doc_with_tokens("a", "Python", 127)).keep);
    CHECK(filter_min_tokens(doc_with_tokens("a", "Python", 128)).keep);
    CHECK_FALSE(filter_min_tokens(doc_with_tokens("a", "Python", 0)).keep);
    CHECK(filter_min_tokens(doc_with_tokens("a", "Python", 5), 5).keep);
}

TEST_CASE("strip_boilerplate") {
    const std::string header =
        "// Copyright 2024 Example Corp.\n"
        "// Licensed under the Apache License, Version 2.0.\n"
        "\n";
    const std::string body = "#include <cstdio>\nint main() { return 0; }\n";

    SUBCASE("header only becomes empty and flagged") {
        auto r = strip_boilerplate(make_document("a.cc", "C++", header));
        CHECK(r.emptied);
        CHECK(r.doc.content.empty());
        CHECK(r.doc.char_count == 0);
    }
    SUBCASE("no header is the identity") {
        auto d = make_document("a.cc", "C++", body);
        auto r = strip_boilerplate(d);
        CHECK_FALSE(r.emptied);
        CHECK(r.doc.content == body);
        CHECK(r.removed_bytes == 0);
    }
    SUBCASE("header plus body keeps the body byte-identical") {
        auto r = strip_boilerplate(make_document("a.cc", "C++", header + body));
        CHECK(r.doc.content == body);
        CHECK(r.doc.token_count == make_document("b", "C++", body).token_count);
    }
    SUBCASE("block comment and hash comment headers") {
        const std::string c = "/*\n * SPDX-License-Identifier: MIT\n */\n\nx = 1\n";
        CHECK(strip_boilerplate(make_document("a.c", "C", c)).doc.content == "x = 1\n");
        const std::string py = "#!/usr/bin/env python\n# (c) 2023 Someone\n# All rights reserved.\n\nimport os\n";
        CHECK(strip_boilerplate(make_document("a.py", "Python", py)).doc.content == "import os\n");
    }
    SUBCASE("ordinary leading comments survive") {
        const std::string src = "// Compute the answer.\nint answer() { return 42; }\n";
        CHECK(strip_boilerplate(make_document("a.cc", "C++", src)).doc.content == src);
    }
    SUBCASE("trailing metadata lines are removed") {
        const std::string src = body + "\n// vim: set ts=4 sw=4:\n";
        CHECK(strip_boilerplate(make_document("a.cc", "C++", src)).doc.content == body);
    }
    SUBCASE("preprocessor directives are not comments") {
        const std::string src = "#include <license.h>\nint x;\n";
        CHECK(strip_boilerplate(make_document("a.c", "C", src)).doc.content == src);
    }
}

TEST_CASE("filter_timestamp is inclusive on both ends") {
    const auto window = TimeWindow::parse("2024-05", "2024-11");
    auto at = [&](const char* date) {
        auto d = make_document("a", "Python", "x");
        d.created_at = parse_date(date);
        return filter_timestamp(d, window).keep;
    };
    CHECK(at("2024-07-01"));
    CHECK_FALSE(at("2024-04-30"));
    CHECK(at("2024-05-01"));
    CHECK(at("2024-11-30"));
    CHECK_FALSE(at("2024-12-01"));

    const auto d = filter_timestamp("2024-13-01", window);
    CHECK_FALSE(d.keep);
    CHECK(d.reason.find("malformed date") != std::string::npos);
    CHECK_FALSE(filter_timestamp("yesterday", window).keep);
    CHECK_FALSE(filter_timestamp(make_document("a", "Python", "x"), window).keep);
    CHECK_THROWS_AS(TimeWindow::parse("2024-11", "2024-05"), Error);
}

TEST_CASE("parse_date month forms resolve to month bounds") {
    CHECK(format_date(parse_date("2024-02", DateBound::end)) == "2024-02-29");
    CHECK(format_date(parse_date("2024-02", DateBound::start)) == "2024-02-01");
    CHECK_THROWS(parse_date("2024-02-30"));
    CHECK_THROWS(parse_date("24-02-01"));
}

TEST_CASE("quality filter rejects by line ratio") {
    QualityFilter q({QualityFilter::comment_ratio_rule(0.5)});
    CHECK(q.check(make_document("a", "Python", "# a\nx = 1\ny = 2\n")).keep);
    CHECK_FALSE(q.check(make_document("a", "Python", "# a\n# b\nx = 1\n")).keep);
    CHECK_THROWS_AS(QualityFilter({{"bad", "(", 0.5}}), Error);
}

TEST_CASE("CorpusManifest ordering and totals") {
    CorpusManifest m({doc_with_tokens("b", "Go", 3), doc_with_tokens("a", "Go", 2), doc_with_tokens("c", "C", 5)});
    CHECK(m.documents()[0].doc_id == "a");
    CHECK(m.language_tokens().at("Go") == 5);
    CHECK(m.total_tokens() == 10);
    CHECK_THROWS_AS(CorpusManifest({doc_with_tokens("a", "Go", 1), doc_with_tokens("a", "C", 1)}), Error);
}

TEST_CASE("manifest JSONL round trip and validation") {
    auto d = doc_with_tokens("x/a.py", "Python", 4);
    d.created_at = parse_date("2024-06-01");
    CorpusManifest m({d, make_document("x/b.go", "Go", "package main\nfunc é() {}\n", "repo1")}, {"note"});
    const auto text = manifest_to_jsonl(m, {"abc"});
    const auto back = parse_manifest(text);
    CHECK(manifest_to_jsonl(back, {"abc"}) == text);
    CHECK(back.documents()[0].created_at == d.created_at);

    auto tampered = text;
    tampered.replace(tampered.find("\"char_count\":15"), 15, "\"char_count\":16");
    CHECK_THROWS_WITH_AS(parse_manifest(tampered), doctest::Contains(":2:"), Error);
}

TEST_CASE("distribution_report") {
    CHECK_THROWS_AS(distribution_report(CorpusManifest{}), Error);
    {
        CorpusManifest m({doc_with_tokens("a", "Rust", 10)});
        const auto r = distribution_report(m);
        REQUIRE(r.size() == 1);
        CHECK(r[0].second == 1.0);
    }
    {
        CorpusManifest m({doc_with_tokens("a", "A", 300), doc_with_tokens("b", "B", 100)});
        const auto r = distribution_report(m);
        CHECK(r[0] == LanguageShare{"A", 0.75});
        CHECK(r[1] == LanguageShare{"B", 0.25});
    }
    SUBCASE("long-tail fixture") {
        // 10000 tokens; the tail languages hold 88, 80, 66, 38 and 3 tokens.
        const std::vector<std::pair<std::string, std::size_t>> mix = {
            {"Python", 3000}, {"Java", 2400}, {"JavaScript", 2000}, {"Go", 1000}, {"Rust", 600},
            {"C", 725},       {"Perl", 88},   {"Shell", 80},        {"C++", 66},  {"Vue", 38},  {"SQL", 3}};
        std::vector<CodeDocument> docs;
        for (const auto& [lang, n] : mix) docs.push_back(doc_with_tokens(lang + ".src", lang, n));
        const auto r = distribution_report(CorpusManifest(std::move(docs)));
        double sum = 0;
        for (const auto& s : r) sum += s.second;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i - 1].second >= r[i].second);
        const std::vector<std::pair<std::string, double>> tail(r.end() - 5, r.end());
        CHECK(tail[0].first == "Perl");
        CHECK(tail[0].second * 100 == doctest::Approx(0.88).epsilon(1e-12));
        CHECK(tail[1].second * 100 == doctest::Approx(0.80).epsilon(1e-12));
        CHECK(tail[2].second * 100 == doctest::Approx(0.66).epsilon(1e-12));
        CHECK(tail[3].second * 100 == doctest::Approx(0.38).epsilon(1e-12));
        CHECK(tail[4].first == "SQL");
        CHECK(tail[4].second * 100 == doctest::Approx(0.03).epsilon(1e-12));
    }
}

TEST_CASE("weighted_sample") {
    std::vector<CodeDocument> pool;
    for (int i = 0; i < 90; ++i) pool.push_back(doc_with_tokens("a" + std::to_string(100 + i), "A", 100));
    for (int i = 0; i < 10; ++i) pool.push_back(doc_with_tokens("b" + std::to_string(100 + i), "B", 100));
    const CorpusManifest m(std::move(pool));

    SUBCASE("single language") {
        const auto s = weighted_sample(m, {{"A", 1.0}}, 1000, 1);
        for (const auto& d : s.documents()) CHECK(d.language == "A");
        CHECK(s.total_tokens() == 1000);
    }
    SUBCASE("rebalances a skewed pool to 50/50") {
        const auto s = weighted_sample(m, {{"A", 0.5}, {"B", 0.5}}, 1000, 42);
        const double a = static_cast<double>(s.language_tokens().at("A"));
        const double b = static_cast<double>(s.language_tokens().at("B"));
        const double total = a + b;
        // Within one 100-token document of the 500-token target.
        CHECK(std::abs(a - 500.0) <= 100.0);
        CHECK(std::abs(b - 500.0) <= 100.0);
        CHECK(std::abs(a / total - 0.5) <= 100.0 / total);
    }
    SUBCASE("deterministic for a seed, different across seeds") {
        auto ids = [](const CorpusManifest& x) {
            std::vector<std::string> v;
            for (const auto& d : x.documents()) v.push_back(d.doc_id);
            return v;
        };
        CHECK(ids(weighted_sample(m, {{"A", 0.5}, {"B", 0.5}}, 600, 3)) ==
              ids(weighted_sample(m, {{"A", 0.5}, {"B", 0.5}}, 600, 3)));
        CHECK(ids(weighted_sample(m, {{"A", 0.5}, {"B", 0.5}}, 600, 3)) !=
              ids(weighted_sample(m, {{"A", 0.5}, {"B", 0.5}}, 600, 4)));
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH_AS(weighted_sample(m, {{"A", 0.5}, {"B", 0.5}}, 4000, 1), doctest::Contains("'B'"), Error);
        CHECK_THROWS_AS(weighted_sample(m, {{"A", 0.6}, {"B", 0.5}}, 100, 1), Error);
        CHECK_THROWS_AS(weighted_sample(m, {{"C", 1.0}}, 100, 1), Error);
    }
}

TEST_CASE("ingest directory with sidecar metadata") {
    const auto dir = testing::temp_dir("ingest");
    std::filesystem::create_directories(dir / "src" / "pkg");
    std::ofstream(dir / "src" / "pkg" / "a.py") << "import os\n";
    std::ofstream(dir / "src" / "b.rs") << "fn main() {}\n";
    std::ofstream(dir / "src" / "notes.txt") << "plain text\n";
    std::ofstream(dir / "meta.jsonl") << R"({"path": "pkg/a.py", "repo_id": "r1", "created_at": "2024-06-02"})" << '\n'
                                      << R"({"path": "b.rs", "repo_id": "r2", "created_at": "June"})" << '\n';
    const auto docs = ingest(dir / "src", dir / "meta.jsonl");
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].doc.doc_id == "b.rs");
    CHECK(docs[0].doc.language == "Rust");
    CHECK_FALSE(docs[0].doc.created_at.has_value());
    CHECK(docs[0].created_at_text == "June");
    CHECK(docs[1].doc.doc_id == "pkg/a.py");
    CHECK(docs[1].doc.repo_id == "r1");
    CHECK(format_date(*docs[1].doc.created_at) == "2024-06-02");
    std::filesystem::remove_all(dir);
}

TEST_CASE("build_corpus attrition and order independence") {
    const std::string license = "# Copyright 2024 ACME\n# License: MIT\n";
    std::vector<IngestedDocument> input;
    auto add = [&](std::string id, std::string content, std::string date) {
        IngestedDocument d;
        d.doc = make_document(std::move(id), "Python", std::move(content));
        d.created_at_text = date;
        d.doc.created_at = parse_date(date);
        input.push_back(std::move(d));
    };
    std::mt19937_64 rng(5);
    const std::string body_a = testing::random_text(rng, 1200, "abcdefgh ()=+\n");
    const std::string body_b = testing::random_text(rng, 1200, "ijklmnop ()=+\n");
    add("a.py", license + body_a, "2024-06-01");
    add("a_copy.py", body_a, "2024-06-02");
    add("b.py", body_b, "2024-07-01");
    add("old.py", testing::random_text(rng, 1200, "qrstuv ()=\n"), "2023-01-01");
    add("short.py", "x = 1\n", "2024-06-01");
    add("lic.py", license, "2024-06-01");

    CorpusBuildConfig cfg;
    cfg.min_tokens = 20;
    cfg.window = TimeWindow::parse("2024-05", "2024-11");
    const auto r = build_corpus(input, cfg);
    std::vector<std::string> kept;
    for (const auto& d : r.manifest.documents()) kept.push_back(d.doc_id);
    CHECK(kept == std::vector<std::string>{"a.py", "b.py"});
    REQUIRE(r.attrition.size() == 4);
    CHECK(r.attrition[0].stage == "strip_boilerplate");
    CHECK(r.attrition[0].out == 5);
    CHECK(r.attrition[1].out == 4);
    CHECK(r.attrition[2].out == 3);
    CHECK(r.attrition[3].stage == "dedup");
    CHECK(r.attrition[3].out == 2);
    // a.py lost its header, so it matches a_copy.py exactly.
    CHECK(r.manifest.find("a.py")->content == body_a);

    std::reverse(input.begin(), input.end());
    cfg.workers = 3;
    const auto r2 = build_corpus(input, cfg);
    CHECK(manifest_to_jsonl(r2.manifest) == manifest_to_jsonl(r.manifest));
}
