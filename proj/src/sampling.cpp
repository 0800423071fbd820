#include "codebpc/sampling.hpp"

#include "codebpc/common.hpp"
#include "codebpc/digest.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace codebpc {

namespace {

// Fisher-Yates over raw engine output; std::shuffle's algorithm is unspecified.
template <typename T>
void stable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

std::uint64_t language_seed(std::uint64_t seed, const std::string& lang) {
    const auto h = sha256_hex(lang);
    return seed ^ std::stoull(h.substr(0, 16), nullptr, 16);
}

}  // namespace

CorpusManifest weighted_sample(const CorpusManifest& pool, const std::map<std::string, double>& target,
                               std::uint64_t total_tokens, std::uint64_t seed) {
    if (target.empty()) throw config_error("target distribution is empty");
    double sum = 0.0;
    for (const auto& [lang, frac] : target) {
        if (!(frac >= 0.0 && frac <= 1.0)) throw config_error("target fraction for '" + lang + "' outside [0,1]");
        sum += frac;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw config_error("target fractions sum to " + std::to_string(sum) + ", not 1");

    std::map<std::string, std::vector<const CodeDocument*>> by_lang;
    for (const auto& d : pool.documents()) by_lang[d.language].push_back(&d);

    std::vector<CodeDocument> chosen;
    for (const auto& [lang, frac] : target) {
        auto it = by_lang.find(lang);
        if (it == by_lang.end()) throw config_error("language '" + lang + "' not present in pool");
        const double goal = frac * static_cast<double>(total_tokens);
        auto candidates = it->second;
        std::mt19937_64 rng(language_seed(seed, lang));
        stable_shuffle(candidates, rng);
        double taken = 0.0;
        for (const CodeDocument* d : candidates) {
            if (taken >= goal) break;
            chosen.push_back(*d);
            taken += static_cast<double>(d->token_count);
        }
        if (taken < goal) {
            throw compute_error("pool exhausted for language '" + lang + "': shortfall of " +
                                std::to_string(static_cast<std::uint64_t>(std::ceil(goal - taken))) + " tokens");
        }
    }
    CorpusManifest out(std::move(chosen), pool.provenance());
    std::string note = "weighted_sample: total_tokens=" + std::to_string(total_tokens) + " seed=" + std::to_string(seed);
    for (const auto& [lang, frac] : target) note += " " + lang + "=" + std::to_string(frac);
    out.add_note(note);
    return out;
}

std::vector<LanguageShare> distribution_report(const CorpusManifest& manifest) {
    if (manifest.empty()) throw input_error("distribution report of an empty manifest");
    const auto total = manifest.total_tokens();
    if (total == 0) throw input_error("manifest has zero tokens");
    std::vector<LanguageShare> out;
    for (const auto& [lang, count] : manifest.language_tokens())
        out.emplace_back(lang, static_cast<double>(count) / static_cast<double>(total));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return out;
}

}  // namespace codebpc
