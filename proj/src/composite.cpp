#include "codebpc/composite.hpp"

#include "codebpc/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace codebpc {

using nlohmann::json;

CompositeScore composite_score(const std::vector<BenchmarkResult>& results) {
    if (results.empty()) throw input_error("composite score needs at least one benchmark result");
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::uint64_t> task_instances;
    for (const auto& r : results) {
        if (r.task.empty()) throw input_error("benchmark result with empty task label");
        if (r.benchmark.empty()) throw input_error("benchmark result with empty benchmark name");
        if (!(r.score >= 0.0 && r.score <= 1.0))
            throw input_error("score for " + r.task + "/" + r.benchmark + " outside [0,1]: " + std::to_string(r.score));
        if (r.instance_count < 1) throw input_error("instance_count for " + r.task + "/" + r.benchmark + " must be >= 1");
        if (!seen.emplace(r.task, r.benchmark).second)
            throw input_error("duplicate (task, benchmark) pair: " + r.task + "/" + r.benchmark);
        task_instances[r.task] += r.instance_count;
    }
    const double n_tasks = static_cast<double>(task_instances.size());

    CompositeScore out;
    for (const auto& r : results) {
        const double w = (1.0 / n_tasks) * (static_cast<double>(r.instance_count) /
                                            static_cast<double>(task_instances[r.task]));
        out.weights.push_back({r.task, r.benchmark, r.instance_count, r.score, w});
    }
    std::sort(out.weights.begin(), out.weights.end(), [](const auto& a, const auto& b) {
        return std::tie(a.task, a.benchmark) < std::tie(b.task, b.benchmark);
    });

    CompensatedSum num, den;
    std::map<std::string, CompensatedSum> task_num;
    for (const auto& e : out.weights) {
        num.add(e.weight * e.score);
        den.add(e.weight);
        task_num[e.task].add(static_cast<double>(e.instance_count) * e.score);
    }
    out.c = num.value() / den.value();
    // Guard the [min s, max s] bound against last-ulp rounding.
    const auto [lo, hi] = std::minmax_element(results.begin(), results.end(),
                                              [](const auto& a, const auto& b) { return a.score < b.score; });
    out.c = std::clamp(out.c, lo->score, hi->score);
    for (auto& [task, sum] : task_num)
        out.task_subtotals[task] = sum.value() / static_cast<double>(task_instances[task]);
    return out;
}

double intelligence_metric(double c) {
    if (c == 0.0) throw compute_error("log of zero score");
    if (!(c > 0.0) || !std::isfinite(c)) throw compute_error("composite score must be positive, got " + std::to_string(c));
    return std::log(c);
}

double intelligence_metric(const CompositeScore& score) { return intelligence_metric(score.c); }

std::vector<BenchmarkResult> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open results " + path.string());
    std::vector<BenchmarkResult> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json obj = json::parse(line);
            if (obj.contains("kind")) continue;  // artifact header
            BenchmarkResult r;
            r.task = obj.at("task").get<std::string>();
            r.benchmark = obj.at("benchmark").get<std::string>();
            const auto count = obj.at("instance_count").get<std::int64_t>();
            if (count < 1) throw input_error("instance_count must be >= 1");
            r.instance_count = static_cast<std::uint64_t>(count);
            r.score = obj.at("score").get<double>();
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw input_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_results(const std::vector<BenchmarkResult>& results, const std::filesystem::path& path,
                   const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write results " + path.string());
    out << json{{"kind", "benchmark_results"}, {"tool_version", kToolVersion}, {"config_hash", config_hash}}.dump()
        << '\n';
    for (const auto& r : results)
        out << json{{"task", r.task}, {"benchmark", r.benchmark}, {"instance_count", r.instance_count}, {"score", r.score}}
                   .dump()
            << '\n';
    if (!out) throw output_error("write failed for " + path.string());
}

json composite_json(const CompositeScore& score, const std::string& config_hash) {
    json weights = json::array();
    for (const auto& e : score.weights)
        weights.push_back({{"task", e.task},
                           {"benchmark", e.benchmark},
                           {"instance_count", e.instance_count},
                           {"score", e.score},
                           {"weight", e.weight}});
    json out = {{"kind", "score_report"},
                {"tool_version", kToolVersion},
                {"config_hash", config_hash},
                {"C", score.c},
                {"tasks", score.task_subtotals.size()},
                {"task_subtotals", score.task_subtotals},
                {"weights", weights}};
    out["log_C"] = score.c > 0.0 ? json(std::log(score.c)) : json(nullptr);
    return out;
}

}  // namespace codebpc
