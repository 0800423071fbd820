#include "codebpc/minhash.hpp"

#include "codebpc/common.hpp"
#include "codebpc/unicode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <unordered_map>

namespace codebpc {

namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t mod_mersenne(unsigned __int128 x) {
    std::uint64_t r = static_cast<std::uint64_t>(x & kMersenne61) + static_cast<std::uint64_t>(x >> 61);
    r = (r & kMersenne61) + (r >> 61);
    return r >= kMersenne61 ? r - kMersenne61 : r;
}

}  // namespace

std::vector<std::uint64_t> shingle_hashes(std::string_view content, std::size_t width) {
    if (width == 0) throw config_error("shingle width must be positive");
    const auto cuts = utf8::boundaries(content);
    const std::size_t scalars = cuts.size() - 1;
    if (scalars < width) throw input_error("document too short to shingle");
    std::vector<std::uint64_t> out;
    out.reserve(scalars - width + 1);
    for (std::size_t i = 0; i + width <= scalars; ++i)
        out.push_back(mix64(fnv1a(content.substr(cuts[i], cuts[i + width] - cuts[i]))));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double set_jaccard(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t i = 0, j = 0, inter = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++inter, ++i, ++j;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

MinHasher::MinHasher(std::size_t permutations, std::uint64_t seed) {
    if (permutations == 0) throw config_error("permutation count must be positive");
    std::mt19937_64 rng(seed);
    a_.reserve(permutations);
    b_.reserve(permutations);
    for (std::size_t i = 0; i < permutations; ++i) {
        a_.push_back(1 + rng() % (kMersenne61 - 1));
        b_.push_back(rng() % kMersenne61);
    }
}

MinHashSignature MinHasher::sign(std::string doc_id, const std::vector<std::uint64_t>& shingles) const {
    MinHashSignature sig{std::move(doc_id), std::vector<std::uint64_t>(a_.size(), std::numeric_limits<std::uint64_t>::max())};
    for (std::uint64_t h : shingles) {
        const std::uint64_t x = mod_mersenne(h);
        for (std::size_t p = 0; p < a_.size(); ++p) {
            const std::uint64_t v = mod_mersenne(static_cast<unsigned __int128>(a_[p]) * x + b_[p]);
            if (v < sig.values[p]) sig.values[p] = v;
        }
    }
    return sig;
}

MinHashSignature minhash_signature(const CodeDocument& doc, std::size_t shingle_width, std::size_t permutations,
                                   std::uint64_t seed) {
    return MinHasher(permutations, seed).sign(doc.doc_id, shingle_hashes(doc.content, shingle_width));
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.values.size() != b.values.size() || a.values.empty())
        throw compute_error("signature lengths differ: " + std::to_string(a.values.size()) + " vs " +
                            std::to_string(b.values.size()));
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) same += a.values[i] == b.values[i] ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(a.values.size());
}

double lsh_collision_probability(double s, std::size_t bands, std::size_t rows) {
    return 1.0 - std::pow(1.0 - std::pow(s, static_cast<double>(rows)), static_cast<double>(bands));
}

void DedupConfig::validate() const {
    if (shingle_width == 0) throw config_error("shingle_width must be positive");
    if (bands == 0 || rows == 0) throw config_error("bands and rows must be positive");
    if (bands * rows != permutations)
        throw config_error("bands x rows (" + std::to_string(bands * rows) + ") must equal permutations (" +
                           std::to_string(permutations) + ")");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw config_error("dedup threshold must lie in [0,1]");
}

std::vector<std::pair<std::size_t, std::size_t>> lsh_candidates(const std::vector<MinHashSignature>& sigs,
                                                                 std::size_t bands, std::size_t rows) {
    for (const auto& s : sigs)
        if (s.values.size() != bands * rows)
            throw compute_error("inconsistent signature length " + std::to_string(s.values.size()) + " for '" +
                                s.doc_id + "', expected " + std::to_string(bands * rows));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t band = 0; band < bands; ++band) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < sigs.size(); ++i) {
            std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ band;
            for (std::size_t r = 0; r < rows; ++r) h = mix64(h ^ sigs[i].values[band * rows + r]);
            buckets[h].push_back(i);
        }
        for (const auto& [key, members] : buckets)
            for (std::size_t x = 0; x < members.size(); ++x)
                for (std::size_t y = x + 1; y < members.size(); ++y) pairs.emplace_back(members[x], members[y]);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

DedupResult lsh_dedup(const CorpusManifest& manifest, const DedupConfig& cfg) {
    cfg.validate();
    const auto& docs = manifest.documents();
    const std::size_t n = docs.size();

    std::vector<std::vector<std::uint64_t>> shingles(n);
    std::vector<char> signable(n, 0);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
        if (utf8::scalar_count(docs[i].content) >= cfg.shingle_width) {
            shingles[i] = shingle_hashes(docs[i].content, cfg.shingle_width);
            signable[i] = 1;
        }
    });

    const MinHasher hasher(cfg.permutations, cfg.seed);
    std::vector<std::size_t> signed_index;  // position in sigs -> doc index
    for (std::size_t i = 0; i < n; ++i)
        if (signable[i]) signed_index.push_back(i);
    std::vector<MinHashSignature> sigs(signed_index.size());
    parallel_for(signed_index.size(), cfg.workers, [&](std::size_t k) {
        const std::size_t i = signed_index[k];
        sigs[k] = hasher.sign(docs[i].doc_id, shingles[i]);
    });

    // Neighbours with a smaller doc index, per document.
    std::vector<std::vector<std::size_t>> earlier(n);
    const auto pairs = lsh_candidates(sigs, cfg.bands, cfg.rows);
    for (const auto& [x, y] : pairs) earlier[signed_index[y]].push_back(signed_index[x]);

    DedupResult result;
    result.candidate_pairs = pairs.size();
    std::vector<char> kept(n, 0);
    std::map<std::string, std::size_t> short_docs;  // exact content -> kept index
    std::vector<CodeDocument> survivors;
    for (std::size_t i = 0; i < n; ++i) {
        bool drop = false;
        if (!signable[i]) {
            auto [it, inserted] = short_docs.try_emplace(docs[i].content, i);
            if (!inserted) {
                result.removed.push_back({docs[i].doc_id, docs[it->second].doc_id, 1.0});
                drop = true;
            }
        } else {
            std::sort(earlier[i].begin(), earlier[i].end());
            for (std::size_t j : earlier[i]) {
                if (!kept[j]) continue;
                const double jac = set_jaccard(shingles[i], shingles[j]);
                if (jac >= cfg.threshold) {
                    result.removed.push_back({docs[i].doc_id, docs[j].doc_id, jac});
                    drop = true;
                    break;
                }
            }
        }
        if (!drop) {
            kept[i] = 1;
            survivors.push_back(docs[i]);
        }
    }
    result.kept = CorpusManifest(std::move(survivors), manifest.provenance());
    char note[160];
    std::snprintf(note, sizeof note, "lsh_dedup: width=%zu perms=%zu bands=%zu rows=%zu threshold=%.4f seed=%llu removed=%zu",
                  cfg.shingle_width, cfg.permutations, cfg.bands, cfg.rows, cfg.threshold,
                  static_cast<unsigned long long>(cfg.seed), result.removed.size());
    result.kept.add_note(note);
    return result;
}

}  // namespace codebpc
