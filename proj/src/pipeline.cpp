#include "codebpc/pipeline.hpp"

#include "codebpc/common.hpp"
#include "codebpc/composite.hpp"
#include "codebpc/corpus.hpp"
#include "codebpc/digest.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace codebpc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!j.is_object()) throw config_error(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw config_error("unknown field '" + key + "' in " + where);
}

json opt_path(const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); }
json opt_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<fs::path> read_opt_path(const json& j) {
    if (j.is_null()) return std::nullopt;
    return fs::path(j.get<std::string>());
}

std::optional<std::string> read_opt_string(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<std::string>();
}

std::string format_alpha(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", alpha);
    return buf;
}

std::string default_model_name(std::size_t order, double alpha) {
    return "ngram-k" + std::to_string(order) + "-a" + format_alpha(alpha);
}

json suite_to_json(const std::vector<CompletionBenchmark>& suite) {
    json out = json::array();
    for (const auto& b : suite)
        out.push_back({{"task", b.task},
                       {"benchmark", b.benchmark},
                       {"span_tokens", b.span_tokens},
                       {"instances", b.instances},
                       {"anchor", anchor_name(b.anchor)}});
    return out;
}

json model_to_json(const ModelSpec& m) {
    if (m.kind == "ngram") return {{"name", m.name}, {"kind", m.kind}, {"order", m.order}, {"alpha", m.alpha}};
    return {{"name", m.name}, {"kind", m.kind}, {"trace", opt_path(m.trace)}, {"results", opt_path(m.results)}};
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw output_error("write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw input_error(path.string() + ": " + e.what());
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write " + path.string());
    out << text;
    if (!out) throw output_error("write failed for " + path.string());
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    for (double alpha : {0.01, 1.0})
        for (std::size_t order = 1; order <= 4; ++order)
            c.models.push_back({default_model_name(order, alpha), "ngram", order, alpha, std::nullopt, std::nullopt});
    c.suite = default_completion_suite();
    return c;
}

RunConfig RunConfig::from_json(const json& j, RunConfig c) {
    // tool_version and config_hash appear in config snapshots and are informational.
    check_keys(j, {"seed", "out_dir", "workers", "corpus", "segmentation", "models", "bpc", "benchmark", "fit",
                   "tool_version", "config_hash"},
               "run config");
    try {
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("workers")) c.workers = j["workers"].get<std::size_t>();
        if (j.contains("segmentation")) c.segmentation = parse_segmentation(j["segmentation"].get<std::string>());

        if (j.contains("corpus")) {
            const auto& k = j["corpus"];
            check_keys(k, {"input", "meta", "synthetic", "min_tokens", "since", "until", "dedup", "dedup_threshold",
                           "heldout_fraction"},
                       "corpus");
            if (k.contains("input")) c.corpus_input = read_opt_path(k["input"]);
            if (k.contains("meta")) c.corpus_meta = read_opt_path(k["meta"]);
            if (k.contains("synthetic")) {
                const auto& s = k["synthetic"];
                check_keys(s, {"documents", "functions_per_document", "duplicate_fraction"}, "corpus.synthetic");
                c.synthetic.documents = s.value("documents", c.synthetic.documents);
                c.synthetic.functions_per_document = s.value("functions_per_document", c.synthetic.functions_per_document);
                c.synthetic.duplicate_fraction = s.value("duplicate_fraction", c.synthetic.duplicate_fraction);
            }
            c.min_tokens = k.value("min_tokens", c.min_tokens);
            if (k.contains("since")) c.since = read_opt_string(k["since"]);
            if (k.contains("until")) c.until = read_opt_string(k["until"]);
            c.dedup = k.value("dedup", c.dedup);
            c.dedup_threshold = k.value("dedup_threshold", c.dedup_threshold);
            c.heldout_fraction = k.value("heldout_fraction", c.heldout_fraction);
        }

        if (j.contains("models")) {
            if (!j["models"].is_array()) throw config_error("models must be an array");
            c.models.clear();
            for (const auto& m : j["models"]) {
                check_keys(m, {"name", "kind", "order", "alpha", "trace", "results"}, "models[]");
                ModelSpec spec;
                spec.kind = m.value("kind", std::string("ngram"));
                spec.order = m.value("order", spec.order);
                spec.alpha = m.value("alpha", spec.alpha);
                if (m.contains("trace")) spec.trace = read_opt_path(m["trace"]);
                if (m.contains("results")) spec.results = read_opt_path(m["results"]);
                spec.name = m.value("name", spec.kind == "ngram" ? default_model_name(spec.order, spec.alpha) : "");
                c.models.push_back(std::move(spec));
            }
        }

        if (j.contains("bpc")) {
            const auto& b = j["bpc"];
            check_keys(b, {"mode", "window", "stride", "tail"}, "bpc");
            if (b.contains("mode")) c.mode = parse_bpc_mode(b["mode"].get<std::string>());
            if (b.contains("tail")) c.window.tail = parse_tail_policy(b["tail"].get<std::string>());
            if (b.contains("window")) {
                c.window.window = b["window"].get<std::size_t>();
                c.window.stride = WindowConfig::with_default_stride(c.window.window).stride;
            }
            if (b.contains("stride")) c.window.stride = b["stride"].get<std::size_t>();
        }

        if (j.contains("benchmark")) {
            const auto& b = j["benchmark"];
            check_keys(b, {"suite"}, "benchmark");
            if (b.contains("suite")) {
                c.suite.clear();
                for (const auto& e : b["suite"]) {
                    check_keys(e, {"task", "benchmark", "span_tokens", "instances", "anchor"}, "benchmark.suite[]");
                    c.suite.push_back({e.at("task").get<std::string>(), e.at("benchmark").get<std::string>(),
                                       e.value("span_tokens", std::size_t{1}), e.value("instances", std::size_t{50}),
                                       parse_anchor(e.value("anchor", std::string("any")))});
                }
            }
        }

        if (j.contains("fit")) {
            const auto& f = j["fit"];
            check_keys(f, {"pearson_space", "slice_by_task"}, "fit");
            if (f.contains("pearson_space")) {
                const auto space = f["pearson_space"].get<std::string>();
                if (space == "log_c") c.pearson_space = PearsonSpace::log_c;
                else if (space == "c") c.pearson_space = PearsonSpace::c;
                else throw config_error("fit.pearson_space must be log_c or c");
            }
            c.slice_by_task = f.value("slice_by_task", c.slice_by_task);
        }
    } catch (const json::exception& e) {
        throw config_error(std::string("run config: ") + e.what());
    }
    return c;
}

json RunConfig::to_json() const {
    json models_json = json::array();
    for (const auto& m : models) models_json.push_back(model_to_json(m));
    return {
        {"seed", seed},
        {"out_dir", out_dir.generic_string()},
        {"workers", workers},
        {"corpus",
         {{"input", opt_path(corpus_input)},
          {"meta", opt_path(corpus_meta)},
          {"synthetic",
           {{"documents", synthetic.documents},
            {"functions_per_document", synthetic.functions_per_document},
            {"duplicate_fraction", synthetic.duplicate_fraction}}},
          {"min_tokens", min_tokens},
          {"since", opt_string(since)},
          {"until", opt_string(until)},
          {"dedup", dedup},
          {"dedup_threshold", dedup_threshold},
          {"heldout_fraction", heldout_fraction}}},
        {"segmentation", segmentation_name(segmentation)},
        {"models", models_json},
        {"bpc",
         {{"mode", bpc_mode_name(mode)},
          {"window", window.window},
          {"stride", window.stride},
          {"tail", tail_policy_name(window.tail)}}},
        {"benchmark", {{"suite", suite_to_json(suite)}}},
        {"fit", {{"pearson_space", pearson_space == PearsonSpace::log_c ? "log_c" : "c"}, {"slice_by_task", slice_by_task}}},
    };
}

void RunConfig::validate() const {
    window.validate();
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) throw config_error("heldout_fraction must lie in (0, 1)");
    if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) throw config_error("dedup_threshold must lie in (0, 1]");
    if (since || until) TimeWindow::parse(since.value_or("0001-01-01"), until.value_or("9999-12-31"));
    if (!corpus_input && (synthetic.documents == 0 || synthetic.functions_per_document == 0))
        throw config_error("synthetic corpus must be non-empty");
    if (synthetic.duplicate_fraction < 0.0 || synthetic.duplicate_fraction >= 1.0)
        throw config_error("duplicate_fraction must lie in [0, 1)");
    if (models.empty()) throw config_error("at least one model is required");
    if (models.size() < 3) throw config_error("fitting needs at least 3 models, got " + std::to_string(models.size()));
    const std::regex name_re("^[A-Za-z0-9._-]+$");
    std::set<std::string> names;
    for (const auto& m : models) {
        if (!std::regex_match(m.name, name_re)) throw config_error("invalid model name '" + m.name + "'");
        if (!names.insert(m.name).second) throw config_error("duplicate model name '" + m.name + "'");
        if (m.kind == "ngram") {
            if (m.order < 1) throw config_error("model '" + m.name + "': order must be >= 1");
            if (!(m.alpha > 0.0)) throw config_error("model '" + m.name + "': alpha must be > 0");
        } else if (m.kind == "trace") {
            if (!m.trace || !m.results) throw config_error("model '" + m.name + "': trace models need trace and results");
            for (const auto& p : {*m.trace, *m.results})
                if (!fs::exists(p)) throw input_error("model '" + m.name + "': missing input " + p.string());
        } else {
            throw config_error("model '" + m.name + "': unknown kind '" + m.kind + "'");
        }
    }
    if (suite.empty() && std::any_of(models.begin(), models.end(), [](const auto& m) { return m.kind == "ngram"; }))
        throw config_error("benchmark suite is empty");
    std::set<std::pair<std::string, std::string>> benches;
    for (const auto& b : suite) {
        if (b.task.empty() || b.benchmark.empty()) throw config_error("benchmark entries need task and benchmark");
        if (b.span_tokens == 0 || b.instances == 0)
            throw config_error("benchmark '" + b.benchmark + "' needs span_tokens and instances >= 1");
        if (!benches.insert({b.task, b.benchmark}).second)
            throw config_error("duplicate benchmark '" + b.task + "/" + b.benchmark + "'");
    }
    if (corpus_input && !fs::exists(*corpus_input)) throw input_error("corpus input not found: " + corpus_input->string());
    if (corpus_meta && !fs::exists(*corpus_meta)) throw input_error("corpus metadata not found: " + corpus_meta->string());
}

std::string RunConfig::hash() const {
    auto j = to_json();
    j.erase("out_dir");
    j.erase("workers");
    return sha256_hex(j.dump());
}

std::size_t RunConfig::resolved_workers() const { return workers ? workers : default_workers(); }

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw config_error(path.string() + ": " + e.what());
    }
    return RunConfig::from_json(j);
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* dir = std::getenv("CODEBPC_OUT_DIR"); dir && *dir) cfg.out_dir = dir;
    if (const char* w = std::getenv("CODEBPC_WORKERS"); w && *w) {
        try {
            const auto n = std::stoul(w);
            if (n > 0) cfg.workers = n;
        } catch (const std::exception&) {
            throw config_error(std::string("CODEBPC_WORKERS is not a number: ") + w);
        }
    }
}

std::string hash_input_path(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_directory(path, ec)) return sha256_file(path);
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file()) entries.emplace_back(fs::relative(e.path(), path).generic_string(), sha256_file(e.path()));
    std::sort(entries.begin(), entries.end());
    std::string listing;
    for (const auto& [rel, digest] : entries) listing += rel + '\0' + digest + '\n';
    return sha256_hex(listing);
}

StageCache::StageCache(fs::path root) : root_(std::move(root)) {}

StageCache::Result StageCache::run(const std::string& stage, const json& material, const std::vector<std::string>& outputs,
                                   const std::function<void(const fs::path&, const std::string&)>& body) {
    Result r;
    r.dir = root_ / stage;
    r.key = sha256_hex(json{{"stage", stage}, {"tool_version", kToolVersion}, {"material", material}}.dump());
    const auto stamp_path = r.dir / kStampFile;

    std::error_code ec;
    if (fs::exists(stamp_path, ec) && !fs::exists(r.dir / kIncompleteFile, ec)) {
        try {
            const auto stamp = read_json_file(stamp_path);
            if (stamp.value("key", "") == r.key) {
                bool intact = true;
                for (const auto& name : outputs) {
                    const auto recorded = stamp.at("outputs").value(name, "");
                    if (recorded.empty() || !fs::exists(r.dir / name) || sha256_file(r.dir / name) != recorded) {
                        intact = false;
                        break;
                    }
                    r.outputs[name] = recorded;
                }
                if (intact) {
                    r.skipped = true;
                    return r;
                }
            }
        } catch (const std::exception&) {
            // An unreadable stamp is treated as a cache miss.
        }
        r.outputs.clear();
    }

    try {
        fs::remove_all(r.dir);
        fs::create_directories(r.dir);
    } catch (const fs::filesystem_error& e) {
        throw output_error("stage '" + stage + "': cannot prepare " + r.dir.string() + ": " + e.what());
    }
    write_text_file(r.dir / kIncompleteFile, "running\n");
    try {
        body(r.dir, r.key);
        for (const auto& name : outputs) {
            if (!fs::exists(r.dir / name)) throw output_error("expected output " + name + " was not produced");
            r.outputs[name] = sha256_file(r.dir / name);
        }
    } catch (const Error& e) {
        write_text_file(r.dir / kIncompleteFile, std::string("failed: ") + e.what() + "\n");
        throw Error(e.kind(), "stage '" + stage + "' failed: " + e.what());
    } catch (const std::exception& e) {
        write_text_file(r.dir / kIncompleteFile, std::string("failed: ") + e.what() + "\n");
        throw compute_error("stage '" + stage + "' failed: " + e.what());
    }
    write_json_file(stamp_path, {{"stage", stage},
                                 {"key", r.key},
                                 {"config_hash", r.key},
                                 {"tool_version", kToolVersion},
                                 {"material", material},
                                 {"outputs", r.outputs}});
    fs::remove(r.dir / kIncompleteFile, ec);
    return r;
}

RunSummary run_end_to_end(const RunConfig& cfg) {
    cfg.validate();
    const auto config_hash = cfg.hash();
    const auto workers = cfg.resolved_workers();

    RunSummary summary;
    summary.out_dir = cfg.out_dir;
    summary.config_hash = config_hash;
    try {
        fs::create_directories(cfg.out_dir);
    } catch (const fs::filesystem_error& e) {
        throw output_error("cannot create output directory " + cfg.out_dir.string() + ": " + e.what());
    }
    auto snapshot = cfg.to_json();
    snapshot["tool_version"] = kToolVersion;
    snapshot["config_hash"] = config_hash;
    write_json_file(cfg.out_dir / "config.json", snapshot);
    const auto run_marker = cfg.out_dir / StageCache::kIncompleteFile;
    write_text_file(run_marker, "running\n");

    StageCache cache(cfg.out_dir / "stages");
    auto record = [&](const std::string& stage, const StageCache::Result& r) {
        summary.stages.push_back({stage, r.key, r.skipped});
        return r;
    };

    try {
        // Corpus: ingest or synthesize, then filter, deduplicate and sample.
        json corpus_material = {{"seed", cfg.seed},           {"min_tokens", cfg.min_tokens},
                                {"since", opt_string(cfg.since)}, {"until", opt_string(cfg.until)},
                                {"dedup", cfg.dedup},         {"dedup_threshold", cfg.dedup_threshold}};
        if (cfg.corpus_input) {
            corpus_material["input"] = hash_input_path(*cfg.corpus_input);
            corpus_material["meta"] = cfg.corpus_meta ? json(sha256_file(*cfg.corpus_meta)) : json(nullptr);
        } else {
            corpus_material["synthetic"] = cfg.to_json()["corpus"]["synthetic"];
        }
        const auto corpus = record(
            "corpus", cache.run("corpus", corpus_material, {"manifest.jsonl", "summary.json"},
                                [&](const fs::path& dir, const std::string& key) {
                                    std::vector<IngestedDocument> docs;
                                    if (cfg.corpus_input) {
                                        docs = ingest(*cfg.corpus_input, cfg.corpus_meta);
                                    } else {
                                        auto syn = cfg.synthetic;
                                        syn.seed = cfg.seed;
                                        docs = synthesize_corpus(syn);
                                    }
                                    CorpusBuildConfig bc;
                                    bc.min_tokens = cfg.min_tokens;
                                    if (cfg.since || cfg.until)
                                        bc.window = TimeWindow::parse(cfg.since.value_or("0001-01-01"),
                                                                      cfg.until.value_or("9999-12-31"));
                                    bc.dedup = cfg.dedup;
                                    bc.dedup_cfg.threshold = cfg.dedup_threshold;
                                    bc.dedup_cfg.seed = cfg.seed;
                                    bc.dedup_cfg.workers = workers;
                                    bc.seed = cfg.seed;
                                    bc.workers = workers;
                                    const auto result = build_corpus(std::move(docs), bc);
                                    if (result.manifest.empty())
                                        throw compute_error("no documents survived corpus filtering");
                                    write_manifest(result.manifest, dir / "manifest.jsonl", {key});
                                    write_json_file(dir / "summary.json", corpus_summary(result, key));
                                }));

        // Held-out split.
        const auto split = record(
            "split", cache.run("split",
                               {{"seed", cfg.seed},
                                {"heldout_fraction", cfg.heldout_fraction},
                                {"manifest", corpus.outputs.at("manifest.jsonl")}},
                               {"train.jsonl", "heldout.jsonl"}, [&](const fs::path& dir, const std::string& key) {
                                   const auto [train, heldout] = split_heldout(
                                       read_manifest(corpus.dir / "manifest.jsonl"), cfg.heldout_fraction, cfg.seed);
                                   write_manifest(train, dir / "train.jsonl", {key});
                                   write_manifest(heldout, dir / "heldout.jsonl", {key});
                               }));
        const auto heldout_path = split.dir / "heldout.jsonl";
        const auto& heldout_hash = split.outputs.at("heldout.jsonl");

        const json window_json = {{"mode", bpc_mode_name(cfg.mode)},
                                  {"window", cfg.window.window},
                                  {"stride", cfg.window.stride},
                                  {"tail", tail_policy_name(cfg.window.tail)}};
        json report_inputs = json::object();
        std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> model_outputs;

        for (const auto& spec : cfg.models) {
            std::string source_hash;
            fs::path model_path;
            if (spec.kind == "ngram") {
                const auto trained = record(
                    "model-" + spec.name,
                    cache.run("model-" + spec.name,
                              {{"order", spec.order},
                               {"alpha", spec.alpha},
                               {"segmentation", segmentation_name(cfg.segmentation)},
                               {"train", split.outputs.at("train.jsonl")}},
                              {"model.json"}, [&](const fs::path& dir, const std::string& key) {
                                  NGramModel::train(read_manifest(split.dir / "train.jsonl"), spec.order, spec.alpha,
                                                    cfg.segmentation)
                                      .save(dir / "model.json", key);
                              }));
                model_path = trained.dir / "model.json";
                source_hash = trained.outputs.at("model.json");
            } else {
                model_path = *spec.trace;
                source_hash = sha256_file(*spec.trace);
            }

            const auto bpc = record(
                "bpc-" + spec.name,
                cache.run("bpc-" + spec.name, {{"window", window_json}, {"source", source_hash}, {"heldout", heldout_hash}},
                          {"bpc.json"}, [&](const fs::path& dir, const std::string& key) {
                              const auto heldout = read_manifest(heldout_path);
                              std::optional<NGramModel> model;
                              std::unique_ptr<LogProbSource> src;
                              if (spec.kind == "ngram") {
                                  model = NGramModel::load(model_path);
                                  src = std::make_unique<NGramSource>(*model, heldout);
                              } else {
                                  src = std::make_unique<TraceSource>(load_trace(model_path), &heldout);
                              }
                              BpcReport report;
                              switch (cfg.mode) {
                                  case BpcMode::sliding: report = sliding_window_bpc(*src, cfg.window, workers); break;
                                  case BpcMode::full: report = full_context_bpc(*src, workers); break;
                                  case BpcMode::truncated:
                                      report = truncated_bpc(*src, cfg.window.window, workers);
                                      break;
                              }
                              write_json_file(dir / "bpc.json", bpc_report_json(report, key));
                          }));

            json bench_material = {{"heldout", heldout_hash}};
            if (spec.kind == "ngram") {
                bench_material["suite"] = suite_to_json(cfg.suite);
                bench_material["seed"] = cfg.seed;
                bench_material["model"] = source_hash;
            } else {
                bench_material["results"] = sha256_file(*spec.results);
            }
            const auto bench = record(
                "bench-" + spec.name,
                cache.run("bench-" + spec.name, bench_material, {"results.jsonl", "composite.json"},
                          [&](const fs::path& dir, const std::string& key) {
                              std::vector<BenchmarkResult> results;
                              if (spec.kind == "ngram")
                                  results = run_completion_suite(NGramModel::load(model_path), read_manifest(heldout_path),
                                                                 cfg.suite, cfg.seed, workers);
                              else
                                  results = read_results(*spec.results);
                              const auto score = composite_score(results);
                              write_results(results, dir / "results.jsonl", key);
                              write_json_file(dir / "composite.json", composite_json(score, key));
                          }));

            report_inputs[spec.name] = {{"bpc", bpc.outputs.at("bpc.json")},
                                        {"composite", bench.outputs.at("composite.json")}};
            model_outputs.push_back({spec.name, {bpc.dir / "bpc.json", bench.dir / "composite.json"}});
        }

        // Report: observation points, model comparison, per-task slices and plot data.
        const auto report = record(
            "report",
            cache.run("report", {{"config_hash", config_hash}, {"inputs", report_inputs}},
                      {"points.jsonl", "task_points.jsonl", "fit_report.json", "fit.csv", "fit.svg"},
                      [&](const fs::path& dir, const std::string&) {
                          std::vector<ObservationPoint> points, task_points;
                          json models = json::array();
                          for (const auto& [name, files] : model_outputs) {
                              const auto bpc = read_json_file(files.first);
                              const auto comp = read_json_file(files.second);
                              const double b = bpc.at("BPC").get<double>();
                              const double c = comp.at("C").get<double>();
                              points.push_back(ObservationPoint::make(name, b, c));
                              for (const auto& [task, sub] : comp.at("task_subtotals").items())
                                  task_points.push_back(ObservationPoint::make(name, b, sub.get<double>(), {{"task", task}}));
                              models.push_back({{"model", name}, {"bpc", b}, {"C", c}, {"R1", bpc.at("R1")}, {"R2", bpc.at("R2")}});
                          }
                          std::stable_sort(task_points.begin(), task_points.end(), [](const auto& a, const auto& b) {
                              return a.slices.at("task") < b.slices.at("task");
                          });
                          auto cmp = compare_models(points);
                          if (cfg.pearson_space == PearsonSpace::c)
                              for (auto& r : cmp.ranked)
                                  if (r.form == ModelForm::log_linear)
                                      r.pearson_r = fit_log_model(points, PearsonSpace::c).pearson_r;
                          json forms = json::array();
                          for (const auto& r : cmp.ranked) forms.push_back(fit_report_json(r, points));
                          json slices = json::array();
                          if (cfg.slice_by_task) {
                              std::set<std::string> tasks;
                              for (const auto& p : task_points) tasks.insert(p.slices.at("task"));
                              for (const auto& task : tasks) {
                                  try {
                                      slices.push_back(fit_report_json(slice_fit(task_points, "task", task), task_points));
                                  } catch (const Error& e) {
                                      slices.push_back({{"slice", "task=" + task}, {"error", e.what()}});
                                  }
                              }
                          }
                          write_points(points, dir / "points.jsonl", config_hash);
                          write_points(task_points, dir / "task_points.jsonl", config_hash);
                          write_json_file(dir / "fit_report.json",
                                          {{"kind", "fit_report"},
                                           {"tool_version", kToolVersion},
                                           {"config_hash", config_hash},
                                           {"pearson_space", cfg.pearson_space == PearsonSpace::log_c ? "log_c" : "c"},
                                           {"winner", model_form_name(cmp.winner())},
                                           {"models", models},
                                           {"fits", forms},
                                           {"slices", slices}});
                          emit_plot_data(cmp.ranked, points, dir / "fit", config_hash);
                      }));
        summary.report_dir = report.dir;
        summary.points = read_points(report.dir / "points.jsonl");
        summary.comparison = compare_models(summary.points);
    } catch (const Error& e) {
        write_text_file(run_marker, std::string("failed: ") + e.what() + "\n");
        throw;
    }

    json stages = json::array();
    for (const auto& s : summary.stages)
        stages.push_back({{"stage", s.stage}, {"key", s.key}, {"status", s.skipped ? "skipped" : "executed"}});
    const auto& best = summary.comparison.ranked.front();
    write_json_file(cfg.out_dir / "run.json", {{"kind", "run_log"},
                                               {"tool_version", kToolVersion},
                                               {"config_hash", config_hash},
                                               {"stages", stages},
                                               {"winner", model_form_name(best.form)},
                                               {"report_dir", summary.report_dir.generic_string()}});
    std::error_code ec;
    fs::remove(run_marker, ec);
    return summary;
}

}  // namespace codebpc
