#include "codebpc/bpc.hpp"
#include "codebpc/common.hpp"
#include "codebpc/composite.hpp"
#include "codebpc/corpus.hpp"
#include "codebpc/digest.hpp"
#include "codebpc/extraction.hpp"
#include "codebpc/fit.hpp"
#include "codebpc/ngram.hpp"
#include "codebpc/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace codebpc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Config hash of a one-shot command: sha256 of its resolved options.
std::string options_hash(const json& options) { return sha256_hex(options.dump()); }

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw output_error("write failed for " + path.string());
}

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::size_t workers_or_default(std::size_t w) { return w ? w : default_workers(); }

struct CorpusBuildArgs {
    std::string input;
    std::optional<std::string> meta, since, until, summary;
    std::size_t min_tokens = kDefaultMinTokens;
    double threshold = 0.85;
    bool no_dedup = false;
    std::uint64_t seed = 0x5eed;
    std::vector<std::string> sample;
    std::uint64_t total_tokens = 0;
    std::size_t workers = 0;
    std::string out;
};

void corpus_build(const CorpusBuildArgs& a) {
    CorpusBuildConfig cfg;
    cfg.min_tokens = a.min_tokens;
    if (a.since || a.until) cfg.window = TimeWindow::parse(a.since.value_or("0001-01-01"), a.until.value_or("9999-12-31"));
    cfg.dedup = !a.no_dedup;
    cfg.dedup_cfg.threshold = a.threshold;
    cfg.dedup_cfg.seed = a.seed;
    cfg.dedup_cfg.workers = cfg.workers = workers_or_default(a.workers);
    cfg.seed = a.seed;
    json sample = nullptr;
    if (!a.sample.empty()) {
        SampleTarget target;
        for (const auto& item : a.sample) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw config_error("--sample expects LANGUAGE=FRACTION, got '" + item + "'");
            try {
                target.fractions[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
            } catch (const std::exception&) {
                throw config_error("--sample fraction is not a number in '" + item + "'");
            }
        }
        if (a.total_tokens == 0) throw config_error("--sample requires --total-tokens");
        target.total_tokens = a.total_tokens;
        sample = {{"fractions", target.fractions}, {"total_tokens", target.total_tokens}};
        cfg.sample = std::move(target);
    }
    const json options = {{"command", "corpus build"},
                          {"input", hash_input_path(a.input)},
                          {"meta", a.meta ? json(sha256_file(*a.meta)) : json(nullptr)},
                          {"min_tokens", a.min_tokens},
                          {"since", opt(a.since)},
                          {"until", opt(a.until)},
                          {"dedup", cfg.dedup},
                          {"dedup_threshold", a.threshold},
                          {"seed", a.seed},
                          {"sample", sample}};
    const auto hash = options_hash(options);
    auto docs = ingest(a.input, a.meta ? std::optional<fs::path>(*a.meta) : std::nullopt);
    const auto result = build_corpus(std::move(docs), cfg);
    write_manifest(result.manifest, a.out, {hash});
    const auto summary = corpus_summary(result, hash);
    write_json(a.summary ? fs::path(*a.summary) : fs::path(a.out + ".summary.json"), summary);
    json brief = {{"documents", result.manifest.size()}, {"tokens", result.manifest.total_tokens()},
                  {"attrition", summary.at("attrition")}};
    std::cout << brief.dump() << '\n';
}

NGramModel model_from_spec(const std::string& spec, std::size_t order, double alpha, const std::string& seg,
                           const CorpusManifest& train) {
    if (spec == "ngram") return NGramModel::train(train, order, alpha, parse_segmentation(seg));
    if (spec.rfind("ngram:", 0) == 0) return NGramModel::load(spec.substr(6));
    throw config_error("--model must be 'ngram' or 'ngram:PATH', got '" + spec + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Code corpus curation, bits-per-character evaluation and BPC/capability fitting"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    // corpus
    auto* corpus = app.add_subcommand("corpus", "Build or inspect a corpus manifest");
    corpus->require_subcommand(1);
    CorpusBuildArgs cb;
    auto* corpus_build_cmd = corpus->add_subcommand("build", "Ingest, filter, deduplicate and sample source files");
    corpus_build_cmd->add_option("--input", cb.input, "Source directory or .tar archive")->required();
    corpus_build_cmd->add_option("--meta", cb.meta, "Sidecar JSON Lines metadata");
    corpus_build_cmd->add_option("--min-tokens", cb.min_tokens, "Reject documents with fewer tokens")->capture_default_str();
    corpus_build_cmd->add_option("--since", cb.since, "Earliest created_at (YYYY-MM-DD or YYYY-MM)");
    corpus_build_cmd->add_option("--until", cb.until, "Latest created_at (YYYY-MM-DD or YYYY-MM)");
    corpus_build_cmd->add_option("--dedup-threshold", cb.threshold, "Jaccard threshold for near duplicates")
        ->capture_default_str();
    corpus_build_cmd->add_flag("--no-dedup", cb.no_dedup, "Skip near-duplicate removal");
    corpus_build_cmd->add_option("--seed", cb.seed, "Seed for hashing and sampling")->capture_default_str();
    corpus_build_cmd->add_option("--sample", cb.sample, "Target mixture entry LANGUAGE=FRACTION (repeatable)");
    corpus_build_cmd->add_option("--total-tokens", cb.total_tokens, "Token budget of the sampled mixture");
    corpus_build_cmd->add_option("--workers", cb.workers, "Worker threads (0 = default)");
    corpus_build_cmd->add_option("--summary", cb.summary, "Summary JSON path (default MANIFEST.summary.json)");
    corpus_build_cmd->add_option("--out", cb.out, "Output manifest (JSON Lines)")->required();

    std::string stats_path;
    auto* corpus_stats_cmd = corpus->add_subcommand("stats", "Print manifest statistics");
    corpus_stats_cmd->add_option("manifest", stats_path, "Corpus manifest")->required();

    // model / trace
    std::string trace_model = "ngram", trace_corpus, trace_out, trace_seg = "chars", trace_name;
    std::optional<std::string> trace_train, trace_save;
    std::size_t trace_order = 3, trace_window = 0;
    double trace_alpha = 1.0;
    auto* trace = app.add_subcommand("trace", "Produce log-probability traces");
    trace->require_subcommand(1);
    auto* trace_gen_cmd = trace->add_subcommand("gen", "Score a corpus with an n-gram model and write a trace");
    trace_gen_cmd->add_option("--model", trace_model, "'ngram' to train, or 'ngram:PATH' to load")->capture_default_str();
    trace_gen_cmd->add_option("--order", trace_order, "n-gram order")->capture_default_str();
    trace_gen_cmd->add_option("--alpha", trace_alpha, "Add-alpha smoothing")->capture_default_str();
    trace_gen_cmd->add_option("--segmentation", trace_seg, "chars | pairs | lexical")->capture_default_str();
    trace_gen_cmd->add_option("--train", trace_train, "Training manifest (default: --corpus)");
    trace_gen_cmd->add_option("--corpus", trace_corpus, "Manifest to score")->required();
    trace_gen_cmd->add_option("--context-window", trace_window, "Producer window in tokens (0 = full prefix)");
    trace_gen_cmd->add_option("--name", trace_name, "Model name recorded in the trace");
    trace_gen_cmd->add_option("--save-model", trace_save, "Also write the model JSON here");
    trace_gen_cmd->add_option("--out", trace_out, "Output trace (JSON Lines)")->required();

    // bpc
    std::optional<std::string> bpc_trace, bpc_model_spec, bpc_corpus;
    std::size_t bpc_window = 2048, bpc_workers = 0;
    std::optional<std::size_t> bpc_stride;
    std::string bpc_mode = "sliding", bpc_tail = "anchor_end", bpc_out;
    auto* bpc = app.add_subcommand("bpc", "Bits-per-character evaluation");
    bpc->require_subcommand(1);
    auto* bpc_compute_cmd = bpc->add_subcommand("compute", "Compute BPC from a trace or an n-gram model");
    auto* trace_opt = bpc_compute_cmd->add_option("--trace", bpc_trace, "Trace file to replay");
    auto* model_opt = bpc_compute_cmd->add_option("--model", bpc_model_spec, "ngram:PATH model file");
    trace_opt->excludes(model_opt);
    bpc_compute_cmd->add_option("--corpus", bpc_corpus, "Corpus manifest (required with --model)");
    bpc_compute_cmd->add_option("--window", bpc_window, "Window W in tokens")->capture_default_str();
    bpc_compute_cmd->add_option("--stride", bpc_stride, "Stride V (default W/4)");
    bpc_compute_cmd->add_option("--tail", bpc_tail, "anchor_end | shrink")->capture_default_str();
    bpc_compute_cmd->add_option("--mode", bpc_mode, "sliding | full | truncated")->capture_default_str();
    bpc_compute_cmd->add_option("--workers", bpc_workers, "Worker threads (0 = default)");
    bpc_compute_cmd->add_option("--out", bpc_out, "Report JSON")->required();

    std::size_t sched_length = 0;
    auto* bpc_schedule_cmd = bpc->add_subcommand("schedule", "Print the sliding-window request schedule");
    bpc_schedule_cmd->add_option("--length", sched_length, "Sequence length in tokens")->required();
    bpc_schedule_cmd->add_option("--window", bpc_window, "Window W")->capture_default_str();
    bpc_schedule_cmd->add_option("--stride", bpc_stride, "Stride V (default W/4)");
    bpc_schedule_cmd->add_option("--tail", bpc_tail, "anchor_end | shrink")->capture_default_str();

    // score
    auto* score = app.add_subcommand("score", "Benchmark aggregation and response analytics");
    score->require_subcommand(1);
    std::string agg_in, agg_out;
    auto* score_agg_cmd = score->add_subcommand("aggregate", "Composite score C and ln C from benchmark results");
    score_agg_cmd->add_option("results", agg_in, "Results JSON Lines")->required();
    score_agg_cmd->add_option("--out", agg_out, "Score report JSON")->required();
    std::string ext_in, ext_out;
    std::optional<std::string> ext_hint;
    auto* score_ext_cmd = score->add_subcommand("extract", "Extract code, flag empty responses, apply the stop rule");
    score_ext_cmd->add_option("responses", ext_in, "Responses JSON Lines ({benchmark, response})")->required();
    score_ext_cmd->add_option("--lang-hint", ext_hint, "Preferred fenced-block language");
    score_ext_cmd->add_option("--out", ext_out, "Records JSON Lines")->required();

    // fit
    std::string fit_points, fit_model = "both", fit_out, fit_space = "log_c";
    std::optional<std::string> fit_slice;
    auto* fit = app.add_subcommand("fit", "Fit BPC against capability and emit plot data");
    fit->add_option("--points", fit_points, "Observation points JSON Lines")->required();
    fit->add_option("--model", fit_model, "log | linear | both")->capture_default_str();
    fit->add_option("--slice", fit_slice, "Restrict to KEY=VALUE, e.g. task=generation");
    fit->add_option("--pearson-space", fit_space, "log_c | c (log-linear form only)")->capture_default_str();
    fit->add_option("--out", fit_out, "Output directory")->required();

    // run
    std::optional<std::string> run_config, run_out, run_mode;
    std::optional<std::size_t> run_workers, run_window, run_stride;
    std::optional<std::uint64_t> run_seed;
    bool run_print_config = false;
    auto* run = app.add_subcommand("run", "Run the cached end-to-end pipeline");
    run->add_option("--config", run_config, "Run config JSON");
    run->add_option("--out", run_out, "Output directory (overrides config and CODEBPC_OUT_DIR)");
    run->add_option("--workers", run_workers, "Worker threads (overrides config and CODEBPC_WORKERS)");
    run->add_option("--seed", run_seed, "Seed");
    run->add_option("--window", run_window, "Window W");
    run->add_option("--stride", run_stride, "Stride V");
    run->add_option("--mode", run_mode, "sliding | full | truncated");
    run->add_flag("--print-config", run_print_config, "Print the resolved config and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "codebpc: error: " << e.what() << '\n';
        return exit_code(ErrorKind::config);
    }

    try {
        if (corpus_build_cmd->parsed()) {
            corpus_build(cb);
        } else if (corpus_stats_cmd->parsed()) {
            std::cout << manifest_stats(read_manifest(stats_path)).dump(2) << '\n';
        } else if (trace_gen_cmd->parsed()) {
            const auto corpus_m = read_manifest(trace_corpus);
            const auto train = trace_train ? read_manifest(*trace_train) : corpus_m;
            const auto model = model_from_spec(trace_model, trace_order, trace_alpha, trace_seg, train);
            const json options = {{"command", "trace gen"},
                                  {"model", trace_model},
                                  {"order", model.order()},
                                  {"alpha", model.alpha()},
                                  {"segmentation", segmentation_name(model.segmentation())},
                                  {"train", sha256_file(trace_train ? *trace_train : trace_corpus)},
                                  {"corpus", sha256_file(trace_corpus)},
                                  {"context_window", trace_window}};
            const auto hash = options_hash(options);
            const auto name = trace_name.empty() ? "ngram-k" + std::to_string(model.order()) : trace_name;
            auto t = ngram_trace(model, corpus_m, name,
                                 trace_window ? std::optional<std::size_t>(trace_window) : std::nullopt);
            t.config_hash = hash;
            write_trace(t, trace_out);
            if (trace_save) model.save(*trace_save, hash);
            std::size_t events = 0;
            for (const auto& d : t.documents) events += d.size();
            std::cout << json{{"documents", t.documents.size()}, {"events", events}, {"vocab", model.vocab_size()}}.dump()
                      << '\n';
        } else if (bpc_compute_cmd->parsed()) {
            if (!bpc_trace && !bpc_model_spec) throw config_error("bpc compute needs --trace or --model");
            WindowConfig wc{bpc_window, bpc_stride.value_or(std::max<std::size_t>(1, bpc_window / 4)),
                            parse_tail_policy(bpc_tail)};
            const auto mode = parse_bpc_mode(bpc_mode);
            if (mode == BpcMode::sliding) wc.validate();
            else if (mode == BpcMode::truncated && bpc_window == 0) throw config_error("window must be >= 1");
            std::optional<CorpusManifest> corpus_m;
            if (bpc_corpus) corpus_m = read_manifest(*bpc_corpus);
            std::optional<NGramModel> model;
            std::unique_ptr<LogProbSource> src;
            json options = {{"command", "bpc compute"},
                            {"mode", bpc_mode_name(mode)},
                            {"window", wc.window},
                            {"stride", wc.stride},
                            {"tail", tail_policy_name(wc.tail)},
                            {"corpus", bpc_corpus ? json(sha256_file(*bpc_corpus)) : json(nullptr)}};
            if (bpc_trace) {
                options["trace"] = sha256_file(*bpc_trace);
                src = std::make_unique<TraceSource>(load_trace(*bpc_trace, corpus_m ? &*corpus_m : nullptr),
                                                    corpus_m ? &*corpus_m : nullptr);
            } else {
                if (!corpus_m) throw config_error("--model requires --corpus");
                if (bpc_model_spec->rfind("ngram:", 0) != 0) throw config_error("--model must be ngram:PATH");
                options["model"] = sha256_file(bpc_model_spec->substr(6));
                model = NGramModel::load(bpc_model_spec->substr(6));
                src = std::make_unique<NGramSource>(*model, *corpus_m);
            }
            const auto workers = workers_or_default(bpc_workers);
            BpcReport report;
            switch (mode) {
                case BpcMode::sliding: report = sliding_window_bpc(*src, wc, workers); break;
                case BpcMode::full: report = full_context_bpc(*src, workers); break;
                case BpcMode::truncated: report = truncated_bpc(*src, wc.window, workers); break;
            }
            write_json(bpc_out, bpc_report_json(report, options_hash(options)));
            std::cout << json{{"BPC", report.bpc_bits}, {"R1", report.r1_bits}, {"R2", report.r2},
                              {"M", report.chars},    {"N", report.tokens}}
                             .dump()
                      << '\n';
        } else if (bpc_schedule_cmd->parsed()) {
            const WindowConfig wc{bpc_window, bpc_stride.value_or(std::max<std::size_t>(1, bpc_window / 4)),
                                  parse_tail_policy(bpc_tail)};
            for (const auto& s : window_schedule(sched_length, wc))
                std::cout << json{{"context_start", s.context_start},
                                  {"score_begin", s.score_begin},
                                  {"score_end", s.score_end}}
                                 .dump()
                          << '\n';
        } else if (score_agg_cmd->parsed()) {
            const auto results = read_results(agg_in);
            const auto s = composite_score(results);
            intelligence_metric(s);
            auto j = composite_json(s, options_hash({{"command", "score aggregate"}, {"results", sha256_file(agg_in)}}));
            write_json(agg_out, j);
            std::cout << json{{"C", s.c}, {"log_C", j.at("log_C")}}.dump() << '\n';
        } else if (score_ext_cmd->parsed()) {
            const auto records = read_responses(ext_in, ext_hint ? std::optional<std::string_view>(*ext_hint) : std::nullopt);
            const auto hash = options_hash({{"command", "score extract"}, {"responses", sha256_file(ext_in)},
                                            {"lang_hint", opt(ext_hint)}});
            std::ofstream out(ext_out, std::ios::binary);
            if (!out) throw output_error("cannot write " + ext_out);
            out << json{{"kind", "response_records"}, {"tool_version", kToolVersion}, {"config_hash", hash}}.dump() << '\n';
            std::size_t empty = 0;
            for (const auto& r : records) {
                out << record_json(r).dump() << '\n';
                empty += r.empty_flag ? 1 : 0;
            }
            if (!out) throw output_error("write failed for " + ext_out);
            const double ratio = empty_ratio(records);
            std::cout << json{{"records", records.size()},
                              {"empty", empty},
                              {"empty_ratio", ratio},
                              {"halt", stop_predicate(empty, records.size())}}
                             .dump()
                      << '\n';
        } else if (fit->parsed()) {
            auto points = read_points(fit_points);
            std::string slice_label;
            if (fit_slice) {
                const auto eq = fit_slice->find('=');
                if (eq == std::string::npos) throw config_error("--slice expects KEY=VALUE");
                const auto key = fit_slice->substr(0, eq), value = fit_slice->substr(eq + 1);
                std::vector<ObservationPoint> kept;
                for (const auto& p : points)
                    if (auto it = p.slices.find(key); it != p.slices.end() && it->second == value) kept.push_back(p);
                if (kept.size() < 3)
                    throw compute_error("slice " + *fit_slice + " has " + std::to_string(kept.size()) +
                                        " points; at least 3 are required");
                points = std::move(kept);
                slice_label = *fit_slice;
            }
            PearsonSpace space;
            if (fit_space == "log_c") space = PearsonSpace::log_c;
            else if (fit_space == "c") space = PearsonSpace::c;
            else throw config_error("--pearson-space must be log_c or c");
            std::vector<FitReport> reports;
            if (fit_model == "both") reports = compare_models(points).ranked;
            else if (fit_model == "log") reports = {fit_log_model(points, space)};
            else if (fit_model == "linear") reports = {fit_linear_model(points)};
            else throw config_error("--model must be log, linear or both");
            for (auto& r : reports) {
                r.slice = slice_label;
                if (r.form == ModelForm::log_linear && space == PearsonSpace::c)
                    r.pearson_r = fit_log_model(points, space).pearson_r;
            }
            const auto hash = options_hash({{"command", "fit"},
                                            {"points", sha256_file(fit_points)},
                                            {"model", fit_model},
                                            {"slice", opt(fit_slice)},
                                            {"pearson_space", fit_space}});
            fs::create_directories(fit_out);
            json forms = json::array();
            for (const auto& r : reports) forms.push_back(fit_report_json(r, points));
            write_json(fs::path(fit_out) / "fit_report.json", {{"kind", "fit_report"},
                                                               {"tool_version", kToolVersion},
                                                               {"config_hash", hash},
                                                               {"pearson_space", fit_space},
                                                               {"winner", model_form_name(reports.front().form)},
                                                               {"fits", forms}});
            emit_plot_data(reports, points, fs::path(fit_out) / "fit", hash);
            json brief = json::array();
            for (const auto& r : reports)
                brief.push_back({{"model_form", model_form_name(r.form)},
                                 {"pearson_r", r.pearson_r},
                                 {"rmse_backtransformed", r.rmse_backtransformed}});
            std::cout << brief.dump() << '\n';
        } else if (run->parsed()) {
            RunConfig cfg = run_config ? load_run_config(*run_config) : RunConfig::defaults();
            apply_env_overrides(cfg);
            if (run_out) cfg.out_dir = *run_out;
            if (run_workers) cfg.workers = *run_workers;
            if (run_seed) cfg.seed = *run_seed;
            if (run_window) {
                cfg.window.window = *run_window;
                if (!run_stride) cfg.window.stride = WindowConfig::with_default_stride(*run_window).stride;
            }
            if (run_stride) cfg.window.stride = *run_stride;
            if (run_mode) cfg.mode = parse_bpc_mode(*run_mode);
            if (run_print_config) {
                std::cout << cfg.to_json().dump(2) << '\n';
                return 0;
            }
            const auto summary = run_end_to_end(cfg);
            std::size_t skipped = 0;
            for (const auto& s : summary.stages) skipped += s.skipped ? 1 : 0;
            json fits = json::array();
            for (const auto& r : summary.comparison.ranked)
                fits.push_back({{"model_form", model_form_name(r.form)},
                                {"pearson_r", r.pearson_r},
                                {"rmse_backtransformed", r.rmse_backtransformed}});
            std::cout << json{{"out_dir", summary.out_dir.generic_string()},
                              {"config_hash", summary.config_hash},
                              {"stages", summary.stages.size()},
                              {"skipped", skipped},
                              {"winner", model_form_name(summary.comparison.winner())},
                              {"fits", fits}}
                             .dump()
                      << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "codebpc: error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "codebpc: error: " << e.what() << '\n';
        return exit_code(ErrorKind::output);
    } catch (const std::exception& e) {
        std::cerr << "codebpc: error: " << e.what() << '\n';
        return exit_code(ErrorKind::compute);
    }
    return 0;
}
