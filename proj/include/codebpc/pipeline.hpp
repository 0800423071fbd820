#pragma once

#include "codebpc/bpc.hpp"
#include "codebpc/fit.hpp"
#include "codebpc/tokenizer.hpp"
#include "codebpc/zoo.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace codebpc {

/// One entry of the model list. "ngram" models are trained on the training split;
/// "trace" models replay an external log-probability trace and read their benchmark
/// results from a JSON Lines file.
struct ModelSpec {
    std::string name;
    std::string kind = "ngram";
    std::size_t order = 1;
    double alpha = 1.0;
    std::optional<std::filesystem::path> trace;
    std::optional<std::filesystem::path> results;
};

/// Fully resolved run configuration. JSON schema (every field optional; unknown keys
/// are rejected):
///
///   { "seed": 7, "out_dir": "codebpc-run", "workers": 0,
///     "corpus": { "input": null, "meta": null,
///                 "synthetic": {"documents": 160, "functions_per_document": 6,
///                               "duplicate_fraction": 0.05},
///                 "min_tokens": 128, "since": null, "until": null,
///                 "dedup": true, "dedup_threshold": 0.85, "heldout_fraction": 0.25 },
///     "segmentation": "chars",
///     "models": [ {"name": "...", "kind": "ngram", "order": 3, "alpha": 0.01},
///                 {"name": "...", "kind": "trace", "trace": "t.jsonl", "results": "r.jsonl"} ],
///     "bpc": { "mode": "sliding", "window": 64, "stride": 16, "tail": "anchor_end" },
///     "benchmark": { "suite": [ {"task": "...", "benchmark": "...", "span_tokens": 4,
///                                "instances": 60, "anchor": "line_start"} ] },
///     "fit": { "pearson_space": "log_c", "slice_by_task": true } }
///
/// out_dir and workers do not enter the config hash.
struct RunConfig {
    std::uint64_t seed = 7;
    std::filesystem::path out_dir = "codebpc-run";
    std::size_t workers = 0;  ///< 0 = default_workers()

    std::optional<std::filesystem::path> corpus_input;
    std::optional<std::filesystem::path> corpus_meta;
    SyntheticCorpusConfig synthetic;
    std::size_t min_tokens = 128;
    std::optional<std::string> since;
    std::optional<std::string> until;
    bool dedup = true;
    double dedup_threshold = 0.85;
    double heldout_fraction = 0.25;

    Segmentation segmentation = Segmentation::chars;
    std::vector<ModelSpec> models;
    BpcMode mode = BpcMode::sliding;
    WindowConfig window{64, 16, TailPolicy::anchor_end};
    std::vector<CompletionBenchmark> suite;
    PearsonSpace pearson_space = PearsonSpace::log_c;
    bool slice_by_task = true;

    /// Defaults: the synthetic corpus and the eight-model n-gram zoo (orders 1-4 at
    /// alpha 0.01 and 1.0) graded on default_completion_suite().
    static RunConfig defaults();
    /// Fields present in `j` override `base`.
    static RunConfig from_json(const nlohmann::json& j, RunConfig base = defaults());
    nlohmann::json to_json() const;

    /// Throws config_error on inconsistent parameters and input_error when a
    /// referenced input does not exist. Performs no other work.
    void validate() const;
    /// sha256 of the canonical JSON without out_dir and workers.
    std::string hash() const;
    std::size_t resolved_workers() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
/// CODEBPC_OUT_DIR and CODEBPC_WORKERS, when set, replace out_dir and workers.
void apply_env_overrides(RunConfig& cfg);

/// Content digest of a file, or of a directory tree (sorted relative paths and file digests).
std::string hash_input_path(const std::filesystem::path& path);

/// Directory-per-stage cache. A stage is skipped when its stamp records the same key
/// and every recorded output still has its recorded digest. While a stage runs its
/// directory holds an INCOMPLETE marker, which is kept (with the cause) on failure.
class StageCache {
public:
    explicit StageCache(std::filesystem::path root);

    struct Result {
        std::filesystem::path dir;
        std::string key;
        bool skipped = false;
        std::map<std::string, std::string> outputs;  ///< file name -> sha256
    };

    /// key = sha256 of {stage, tool_version, material}. `body(dir, key)` must create
    /// every file in `outputs` inside dir. Failures are rethrown with the stage name.
    Result run(const std::string& stage, const nlohmann::json& material, const std::vector<std::string>& outputs,
               const std::function<void(const std::filesystem::path&, const std::string&)>& body);

    static constexpr std::string_view kStampFile = "stamp.json";
    static constexpr std::string_view kIncompleteFile = "INCOMPLETE";

private:
    std::filesystem::path root_;
};

struct StageOutcome {
    std::string stage;
    std::string key;
    bool skipped = false;
};

struct RunSummary {
    std::filesystem::path out_dir;
    std::string config_hash;
    std::vector<StageOutcome> stages;
    std::vector<ObservationPoint> points;
    ModelComparison comparison;
    std::filesystem::path report_dir;
};

/// corpus -> split -> per model (train, bpc, benchmark) -> report. Writes the resolved
/// config to out_dir/config.json and a run log to out_dir/run.json.
RunSummary run_end_to_end(const RunConfig& cfg);

}  // namespace codebpc
