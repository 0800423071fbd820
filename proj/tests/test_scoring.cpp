#include "doctest.h"

#include "codebpc/common.hpp"
#include "codebpc/composite.hpp"
#include "codebpc/extraction.hpp"
#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>

using namespace codebpc;

namespace {

// Oracle: the two-stage weighted mean evaluated literally with nested loops over a task -> benchmarks map.
double oracle_c(const std::vector<BenchmarkResult>& results) {
    std::map<std::string, std::vector<const BenchmarkResult*>> by_task;
    for (const auto& r : results) by_task[r.task].push_back(&r);
    const double n = static_cast<double>(by_task.size());
    long double num = 0, den = 0;
    for (const auto& [task, rows] : by_task) {
        long double size = 0;
        for (const auto* r : rows) size += static_cast<long double>(r->instance_count);
        for (const auto* r : rows) {
            const long double w = (1.0L / n) * static_cast<long double>(r->instance_count) / size;
            num += w * r->score;
            den += w;
        }
    }
    return static_cast<double>(num / den);
}

std::vector<BenchmarkResult> random_results(std::mt19937_64& rng) {
    static const std::vector<std::string> tasks = {"generation", "explanation", "reasoning", "repair"};
    std::vector<BenchmarkResult> out;
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (const auto& t : tasks) {
        if (rng() % 4 == 0 && !out.empty()) continue;
        const auto benches = 1 + rng() % 4;
        for (std::size_t b = 0; b < benches; ++b)
            out.push_back({t, t + "_bench" + std::to_string(b), 1 + rng() % 2000, score(rng)});
    }
    return out;
}

std::vector<BenchmarkResult> example() {
    return {{"A", "a1", 100, 0.8}, {"A", "a2", 300, 0.4}, {"B", "b1", 50, 0.6}};
}

ResponseRecord record_with(bool empty) {
    return make_record("mbpp", empty ? "I cannot help." : "```python\ndef f():\n    return 1\n```");
}

}  // namespace

TEST_CASE("composite score examples") {
    CHECK(composite_score({{"generation", "x", 10, 0.5}}).c == 0.5);
    CHECK(composite_score({{"generation", "x", 10, 1.0}, {"repair", "y", 999, 0.0}}).c == doctest::Approx(0.5));
    const auto s = composite_score(example());
    CHECK(std::abs(s.c - 0.55) <= 1e-12);
    CHECK(s.task_subtotals.at("A") == doctest::Approx(0.5));
    CHECK(s.task_subtotals.at("B") == doctest::Approx(0.6));
    REQUIRE(s.weights.size() == 3);
    CHECK(s.weights[0].weight == doctest::Approx(0.125));
    CHECK(s.weights[1].weight == doctest::Approx(0.375));
    CHECK(s.weights[2].weight == doctest::Approx(0.5));
}

TEST_CASE("composite score matches the brute-force oracle on random result sets") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const auto results = random_results(rng);
        const auto s = composite_score(results);
        CHECK(std::abs(s.c - oracle_c(results)) <= 1e-12);
        double wsum = 0.0, lo = 1.0, hi = 0.0;
        for (const auto& w : s.weights) wsum += w.weight;
        for (const auto& r : results) lo = std::min(lo, r.score), hi = std::max(hi, r.score);
        CHECK(std::abs(wsum - 1.0) <= 1e-12);
        CHECK(s.c >= lo);
        CHECK(s.c <= hi);
    }
}

TEST_CASE("composite score invariants") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        const auto results = random_results(rng);
        const double c = composite_score(results).c;

        auto relabeled = results;
        for (auto& r : relabeled) r.task = "task_" + std::string(r.task.rbegin(), r.task.rend());
        CHECK(composite_score(relabeled).c == doctest::Approx(c).epsilon(1e-14));

        auto split = results;
        auto& victim = split[rng() % split.size()];
        if (victim.instance_count >= 2) {
            const auto half = victim.instance_count / 2;
            BenchmarkResult extra = victim;
            extra.benchmark += "_part2";
            extra.instance_count = victim.instance_count - half;
            victim.instance_count = half;
            split.push_back(extra);
            CHECK(composite_score(split).c == doctest::Approx(c).epsilon(1e-14));
        }

        auto better = results;
        auto& target = better[rng() % better.size()];
        if (target.score < 1.0) {
            target.score = std::min(1.0, target.score + 0.01);
            CHECK(composite_score(better).c > c);
        }
    }
}

TEST_CASE("composite score input errors") {
    CHECK_THROWS_AS(composite_score({}), Error);
    CHECK_THROWS_AS(composite_score({{"A", "x", 1, 1.5}}), Error);
    CHECK_THROWS_AS(composite_score({{"A", "x", 1, -0.1}}), Error);
    CHECK_THROWS_AS(composite_score({{"", "x", 1, 0.5}}), Error);
    CHECK_THROWS_AS(composite_score({{"A", "x", 0, 0.5}}), Error);
    CHECK_THROWS_AS(composite_score({{"A", "x", 1, 0.5}, {"A", "x", 2, 0.6}}), Error);
}

TEST_CASE("intelligence metric") {
    CHECK(intelligence_metric(1.0) == 0.0);
    CHECK(intelligence_metric(std::exp(-1.0)) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(intelligence_metric(composite_score(example())) == doctest::Approx(std::log(0.55)).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(intelligence_metric(0.0), "log of zero score", Error);
    CHECK_THROWS_WITH_AS(intelligence_metric(composite_score({{"A", "x", 3, 0.0}})), "log of zero score", Error);
}

TEST_CASE("results file") {
    const auto dir = testing::temp_dir("scoring");
    std::ofstream(dir / "r.jsonl") << R"({"task":"A","benchmark":"a1","instance_count":100,"score":0.8})" << "\n"
                                   << R"({"task":"A","benchmark":"a2","instance_count":300,"score":0.4})" << "\n\n"
                                   << R"({"task":"B","benchmark":"b1","instance_count":50,"score":0.6})" << "\n";
    CHECK(composite_score(read_results(dir / "r.jsonl")).c == doctest::Approx(0.55));
    std::ofstream(dir / "bad.jsonl") << R"({"task":"A","benchmark":"a1","score":"high"})" << "\n";
    CHECK_THROWS_AS(read_results(dir / "bad.jsonl"), Error);
    const auto j = composite_json(composite_score(example()), "h");
    CHECK(j.at("C").get<double>() == doctest::Approx(0.55));
    CHECK(j.at("config_hash") == "h");
    std::filesystem::remove_all(dir);
}

TEST_CASE("extract_code") {
    CHECK(extract_code("Here you go:\n```python\ndef f():\n    return 1\n```\nDone.") == "def f():\n    return 1");
    CHECK(extract_code("I am sorry, I cannot answer that question.").empty());
    CHECK(extract_code("").empty());

    const std::string two = "Two versions follow.\n```cpp\nint f() { return 1; }\n```\nand\n```python\ndef f():\n"
                            "    return 1\n```\n";
    CHECK(extract_code(two, "python") == "def f():\n    return 1");
    CHECK(extract_code(two, "py") == "def f():\n    return 1");
    CHECK(extract_code(two) == "int f() { return 1; }");
    CHECK(extract_code(two, "rust") == "int f() { return 1; }");

    CHECK(extract_code("Sure:\n```\nx = 1\ny = 2") == "x = 1\ny = 2");
    CHECK(extract_code("The answer is below.\n\ndef add(a, b):\n    return a + b\n") ==
          "def add(a, b):\n    return a + b");
    CHECK(extract_code("Solution:\nimport math\n\ndef area(r):\n    return math.pi * r * r\n") ==
          "import math\n\ndef area(r):\n    return math.pi * r * r");
}

TEST_CASE("extract_code is idempotent on its own output") {
    const std::vector<std::string> responses = {
        "Here you go:\n```python\ndef f():\n    return 1\n```\nDone.",
        "```js\nfunction f() {\n  return 1;\n}\n```",
        "The answer is below.\n\ndef add(a, b):\n    return a + b\n",
        "Solution:\nimport math\n\ndef area(r):\n    return math.pi * r * r\n",
        "x = [i * i for i in range(10)]\nprint(x)",
        "No code here at all, just a polite explanation of things.",
        "```\n\n\nint main() { return 0; }\n\n```",
        "fn main() {\n    println!(\"hi\");\n}\nThat prints a greeting for the user.",
    };
    for (const auto& r : responses) {
        const auto once = extract_code(r);
        CHECK(extract_code(once) == once);
    }
}

TEST_CASE("placeholder_scan") {
    CHECK(placeholder_scan("pass"));
    CHECK(placeholder_scan("def f(x):\n    pass\n"));
    CHECK(placeholder_scan("def f(x):\n    \"\"\"Compute something.\"\"\"\n    ...\n"));
    CHECK(placeholder_scan("def f(x):\n    # TODO: implement\n    raise NotImplementedError()\n"));
    CHECK(placeholder_scan("# just a comment\n# and another\n"));
    CHECK(placeholder_scan("int f(int x) {\n    // TODO\n}\n"));
    CHECK(placeholder_scan("fn f() -> u32 {\n    todo!()\n}\n"));
    CHECK(placeholder_scan("public int f() {\n    throw new UnsupportedOperationException();\n}\n"));
    CHECK(placeholder_scan("function f() {}\n"));
    CHECK_FALSE(placeholder_scan("def f(x):\n    return x + 1\n"));
    CHECK_FALSE(placeholder_scan("def f(x):\n    pass\n\ndef g(x):\n    return x\n"));
    CHECK_FALSE(placeholder_scan("int f() { return 1; }"));
}

TEST_CASE("response records and the empty ratio") {
    CHECK(make_record("b", "```python\ndef f():\n    pass\n```").empty_flag);
    CHECK(make_record("b", "Sorry, no.").empty_flag);
    CHECK_FALSE(make_record("b", "```python\ndef f():\n    return 2\n```").empty_flag);

    std::vector<ResponseRecord> none(100, record_with(false));
    CHECK(empty_ratio(none) == 0.0);
    std::vector<ResponseRecord> two(200, record_with(false));
    two[3] = two[77] = record_with(true);
    CHECK(empty_ratio(two) == doctest::Approx(0.01));
    CHECK(stop_predicate(empty_ratio(two)));
    CHECK(stop_predicate(2, 200));
    CHECK_THROWS_AS(empty_ratio({}), Error);
}

TEST_CASE("empty-response ratio fixture before and after format tuning") {
    std::vector<ResponseRecord> before(399, record_with(false)), after(399, record_with(false));
    for (int i = 0; i < 136; ++i) before[static_cast<std::size_t>(i) * 2] = record_with(true);
    after[398] = record_with(true);
    CHECK(empty_ratio(before) == doctest::Approx(136.0 / 399.0).epsilon(1e-15));
    CHECK(std::round(empty_ratio(before) * 10000) / 10000 == doctest::Approx(0.3409));
    CHECK(std::round(empty_ratio(after) * 10000) / 10000 == doctest::Approx(0.0025));
    CHECK_FALSE(stop_predicate(empty_ratio(before)));
    CHECK(stop_predicate(empty_ratio(after)));
}

TEST_CASE("stop predicate boundary") {
    CHECK(stop_predicate(0.0));
    CHECK(stop_predicate(0.010));
    CHECK_FALSE(stop_predicate(0.011));
    CHECK_FALSE(stop_predicate(1.0));
    CHECK_THROWS_AS(stop_predicate(-0.1), Error);
    CHECK_THROWS_AS(stop_predicate(1.1), Error);
    CHECK(stop_predicate(1, 100));
    CHECK_FALSE(stop_predicate(2, 199));
    CHECK(stop_predicate(0, 1));
}
