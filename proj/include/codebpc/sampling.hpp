#pragma once

#include "codebpc/document.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace codebpc {

/// Per-language draw of documents without replacement. Each language's draw stops
/// once its token total reaches fraction * total_tokens, so it overshoots by less
/// than one document. Deterministic given seed.
/// Throws config_error when fractions do not sum to 1 +- 1e-9 or a language is absent
/// from the pool; compute_error naming the language and shortfall when a pool runs dry.
CorpusManifest weighted_sample(const CorpusManifest& pool, const std::map<std::string, double>& target,
                               std::uint64_t total_tokens, std::uint64_t seed);

using LanguageShare = std::pair<std::string, double>;

/// Token fractions per language, descending (ties by name). Throws on empty input.
std::vector<LanguageShare> distribution_report(const CorpusManifest& manifest);

}  // namespace codebpc
