#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace codebpc {

struct BenchmarkResult {
    std::string task;       ///< generation, explanation, reasoning, repair, ...
    std::string benchmark;
    std::uint64_t instance_count = 1;  ///< |D|
    double score = 0.0;                ///< in [0, 1]
};

struct WeightEntry {
    std::string task;
    std::string benchmark;
    std::uint64_t instance_count = 0;
    double score = 0.0;
    double weight = 0.0;
};

/// Two-stage weighted mean: each of the N tasks present gets 1/N, split across its
/// benchmarks in proportion to instance counts,
///
///   w_kj = (1/N) * |D_kj| / sum_i |D_ki|,   C = sum w_kj s_kj / sum w_kj.
struct CompositeScore {
    double c = 0.0;
    std::map<std::string, double> task_subtotals;  ///< instance-weighted mean per task
    std::vector<WeightEntry> weights;               ///< sorted by (task, benchmark)
};

/// Throws input_error for an empty list, empty task/benchmark names, scores outside
/// [0, 1], zero instance counts, or a repeated (task, benchmark) pair.
CompositeScore composite_score(const std::vector<BenchmarkResult>& results);

/// Natural log of C. Throws compute_error("log of zero score") when C == 0.
double intelligence_metric(const CompositeScore& score);
double intelligence_metric(double c);

/// JSON Lines of {task, benchmark, instance_count, score}; a leading line carrying a
/// "kind" field is an artifact header and is skipped.
std::vector<BenchmarkResult> read_results(const std::filesystem::path& path);
void write_results(const std::vector<BenchmarkResult>& results, const std::filesystem::path& path,
                   const std::string& config_hash = {});
nlohmann::json composite_json(const CompositeScore& score, const std::string& config_hash = {});

}  // namespace codebpc
