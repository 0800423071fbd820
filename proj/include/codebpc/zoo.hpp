#pragma once

#include "codebpc/composite.hpp"
#include "codebpc/corpus.hpp"
#include "codebpc/document.hpp"
#include "codebpc/ngram.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace codebpc {

/// Template-generated Python and JavaScript sources with license headers and a few
/// exact copies, so every corpus stage has something to do.
struct SyntheticCorpusConfig {
    std::size_t documents = 160;
    std::size_t functions_per_document = 6;
    double duplicate_fraction = 0.05;
    std::uint64_t seed = 7;
};

std::vector<IngestedDocument> synthesize_corpus(const SyntheticCorpusConfig& cfg);

/// Deterministic split by hash of (seed, doc_id): returns (train, heldout).
std::pair<CorpusManifest, CorpusManifest> split_heldout(const CorpusManifest& corpus, double heldout_fraction,
                                                        std::uint64_t seed);

/// Where completion prompts are cut.
enum class Anchor {
    any,         ///< any token position
    line_start,  ///< first token of a non-blank line
    after_open,  ///< right after '(' or '['
};
std::string_view anchor_name(Anchor a) noexcept;
Anchor parse_anchor(std::string_view name);

/// One benchmark of the toy next-token completion suite: the model greedily extends
/// a held-out prefix and scores 1 only if all span_tokens tokens match exactly.
struct CompletionBenchmark {
    std::string task;
    std::string benchmark;
    std::size_t span_tokens = 1;
    std::size_t instances = 50;
    Anchor anchor = Anchor::any;
};

/// Four tasks (generation, explanation, reasoning, repair) with two benchmarks each.
std::vector<CompletionBenchmark> default_completion_suite();

struct CompletionInstance {
    std::size_t doc = 0;       ///< index into the held-out manifest
    std::size_t position = 0;  ///< first target token
};

/// Prompt positions for one benchmark; independent of any model, so every model in a
/// zoo is graded on identical instances. Throws compute_error when the corpus has too
/// few eligible positions.
std::vector<CompletionInstance> sample_instances(const CorpusManifest& heldout, Segmentation seg,
                                                 const CompletionBenchmark& bench, std::uint64_t seed);

/// Exact-match accuracy of greedy decoding for every benchmark of `suite`.
std::vector<BenchmarkResult> run_completion_suite(const NGramModel& model, const CorpusManifest& heldout,
                                                  const std::vector<CompletionBenchmark>& suite, std::uint64_t seed,
                                                  std::size_t workers = 1);

}  // namespace codebpc
