#pragma once

#include "codebpc/document.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace codebpc {

/// Sorted, de-duplicated 64-bit hashes of every width-`width` character shingle.
/// Throws input_error("document too short to shingle") when the text has fewer
/// than `width` scalars.
std::vector<std::uint64_t> shingle_hashes(std::string_view content, std::size_t width);

/// Jaccard similarity of two sorted hash sets.
double set_jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

struct MinHashSignature {
    std::string doc_id;
    std::vector<std::uint64_t> values;  ///< one minimum per permutation

    std::size_t permutations() const noexcept { return values.size(); }
};

/// Family of P universal hash permutations h(x) = (a*x + b) mod (2^61 - 1),
/// parameters drawn from mt19937_64(seed).
class MinHasher {
public:
    MinHasher(std::size_t permutations, std::uint64_t seed);

    MinHashSignature sign(std::string doc_id, const std::vector<std::uint64_t>& shingles) const;
    std::size_t permutations() const noexcept { return a_.size(); }

private:
    std::vector<std::uint64_t> a_;
    std::vector<std::uint64_t> b_;
};

MinHashSignature minhash_signature(const CodeDocument& doc, std::size_t shingle_width, std::size_t permutations,
                                   std::uint64_t seed);

/// Fraction of agreeing positions. Throws compute_error on length mismatch.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

/// Probability that a pair of true similarity s shares at least one band.
double lsh_collision_probability(double s, std::size_t bands, std::size_t rows);

struct DedupConfig {
    std::size_t shingle_width = 12;
    std::size_t permutations = 128;
    std::size_t bands = 16;
    std::size_t rows = 8;
    double threshold = 0.85;
    std::uint64_t seed = 0x5eed;
    std::size_t workers = 1;

    void validate() const;
};

struct DuplicateRecord {
    std::string removed;
    std::string representative;
    double jaccard = 0.0;
};

struct DedupResult {
    CorpusManifest kept;
    std::vector<DuplicateRecord> removed;  ///< sorted by removed doc_id
    std::size_t candidate_pairs = 0;
};

/// Candidate pairs sharing at least one LSH band, as (i, j) indices into `sigs`, i < j,
/// sorted ascending. Throws compute_error if any signature length != bands*rows.
std::vector<std::pair<std::size_t, std::size_t>> lsh_candidates(const std::vector<MinHashSignature>& sigs,
                                                                 std::size_t bands, std::size_t rows);

/// Near-duplicate removal. Documents are visited in doc_id order; a document is
/// dropped when an already-kept LSH candidate has verified shingle Jaccard >=
/// threshold, so each duplicate cluster keeps its lowest doc_id. Documents too
/// short to shingle are deduplicated by exact content only.
DedupResult lsh_dedup(const CorpusManifest& manifest, const DedupConfig& cfg);

}  // namespace codebpc
