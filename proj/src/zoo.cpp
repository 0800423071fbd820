#include "codebpc/zoo.hpp"

#include "codebpc/common.hpp"
#include "codebpc/digest.hpp"
#include "codebpc/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

namespace codebpc {

namespace {

constexpr std::array kVerbs = {"load", "parse", "compute", "update", "merge", "filter", "render", "check", "build", "scale"};
constexpr std::array kNouns = {"items", "config", "buffer", "record", "value", "total", "index", "node", "score", "token"};
constexpr std::array kVars = {"result", "count", "acc", "tmp", "data", "offset"};
constexpr std::array kArgs = {"x", "y", "n", "size", "limit", "step"};
constexpr std::array kOps = {"+", "-", "*"};

template <typename A>
std::string pick(std::mt19937_64& rng, const A& options) {
    return options[rng() % options.size()];
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct FunctionParts {
    std::string verb, noun, a, b, v, op;
    int n1, n2;
};

FunctionParts draw_parts(std::mt19937_64& rng) {
    FunctionParts p{pick(rng, kVerbs), pick(rng, kNouns), pick(rng, kArgs), "", pick(rng, kVars), pick(rng, kOps),
                    static_cast<int>(rng() % 10), static_cast<int>(rng() % 100)};
    do p.b = pick(rng, kArgs);
    while (p.b == p.a);
    return p;
}

std::string python_function(std::mt19937_64& rng) {
    const auto p = draw_parts(rng);
    std::string s = "def " + p.verb + "_" + p.noun + "(" + p.a + ", " + p.b + "):\n";
    if (rng() % 2) s += "    \"\"\"" + capitalize(p.verb) + " the " + p.noun + " from " + p.a + ".\"\"\"\n";
    s += "    " + p.v + " = " + p.a + " " + p.op + " " + std::to_string(p.n1) + "\n";
    if (rng() % 2) {
        s += "    for i in range(" + p.b + "):\n";
        s += "        " + p.v + " = " + p.v + " " + pick(rng, kOps) + " i\n";
    }
    if (rng() % 2) {
        s += "    if " + p.v + " > " + std::to_string(p.n2) + ":\n";
        s += "        return " + p.v + "\n";
    }
    s += "    return " + p.v + " " + pick(rng, kOps) + " " + p.b + "\n\n\n";
    return s;
}

std::string javascript_function(std::mt19937_64& rng) {
    const auto p = draw_parts(rng);
    std::string s;
    if (rng() % 2) s += "// " + capitalize(p.verb) + " the " + p.noun + " from " + p.a + ".\n";
    s += "function " + p.verb + capitalize(p.noun) + "(" + p.a + ", " + p.b + ") {\n";
    s += "  let " + p.v + " = " + p.a + " " + p.op + " " + std::to_string(p.n1) + ";\n";
    if (rng() % 2) {
        s += "  for (let i = 0; i < " + p.b + "; i++) {\n";
        s += "    " + p.v + " = " + p.v + " " + pick(rng, kOps) + " i;\n";
        s += "  }\n";
    }
    if (rng() % 2) {
        s += "  if (" + p.v + " > " + std::to_string(p.n2) + ") {\n";
        s += "    return " + p.v + ";\n";
        s += "  }\n";
    }
    s += "  return " + p.v + " " + pick(rng, kOps) + " " + p.b + ";\n}\n\n";
    return s;
}

std::string two_digits(unsigned v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02u", v);
    return buf;
}

std::uint64_t hash64(std::string_view text) {
    const auto hex = sha256_hex(text);
    return std::stoull(hex.substr(0, 16), nullptr, 16);
}

bool is_space_token(const std::string& t) {
    return t.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::vector<std::size_t> eligible_positions(const std::vector<std::string>& tokens, Anchor anchor, std::size_t span) {
    std::vector<std::size_t> out;
    bool line_start = true;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        bool ok = i >= 1 && i + span <= tokens.size();
        switch (anchor) {
            case Anchor::any: break;
            case Anchor::line_start: ok = ok && line_start && !is_space_token(t); break;
            case Anchor::after_open: {
                const auto& prev = i ? tokens[i - 1] : t;
                ok = ok && i >= 1 && !prev.empty() && (prev.back() == '(' || prev.back() == '[');
                break;
            }
        }
        if (ok) out.push_back(i);
        if (t.find('\n') != std::string::npos) line_start = true;
        else if (!is_space_token(t)) line_start = false;
    }
    return out;
}

}  // namespace

std::vector<IngestedDocument> synthesize_corpus(const SyntheticCorpusConfig& cfg) {
    if (cfg.documents == 0 || cfg.functions_per_document == 0) throw config_error("synthetic corpus must be non-empty");
    if (cfg.duplicate_fraction < 0.0 || cfg.duplicate_fraction >= 1.0)
        throw config_error("duplicate_fraction must lie in [0, 1)");
    std::vector<IngestedDocument> out;
    for (std::size_t d = 0; d < cfg.documents; ++d) {
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + d);
        const bool python = d % 3 != 2;
        std::string content;
        if (rng() % 2) {
            const auto prefix = python ? std::string("# ") : std::string("// ");
            content += prefix + "Copyright (c) " + std::to_string(2015 + rng() % 8) + " Example Corp.\n";
            content += prefix + "Licensed under the MIT License.\n\n";
        }
        for (std::size_t f = 0; f < cfg.functions_per_document; ++f)
            content += python ? python_function(rng) : javascript_function(rng);
        const auto repo = "repo" + two_digits(static_cast<unsigned>(d % 12));
        const auto name = repo + "/file" + two_digits(static_cast<unsigned>(d / 12)) + (python ? ".py" : ".js");
        const auto day = static_cast<unsigned>(1 + rng() % 28);
        const auto month = static_cast<unsigned>(1 + rng() % 12);
        const std::string date = std::to_string(2022 + rng() % 2) + "-" + two_digits(month) + "-" + two_digits(day);
        IngestedDocument item{make_document(name, python ? "Python" : "JavaScript", content, repo), date};
        item.doc.created_at = parse_date(date);
        out.push_back(std::move(item));
    }
    const auto copies = static_cast<std::size_t>(static_cast<double>(cfg.documents) * cfg.duplicate_fraction);
    for (std::size_t c = 0; c < copies; ++c) {
        IngestedDocument dup = out[(c * 7) % cfg.documents];
        dup.doc.doc_id = "mirror/" + dup.doc.doc_id;
        out.push_back(std::move(dup));
    }
    return out;
}

std::pair<CorpusManifest, CorpusManifest> split_heldout(const CorpusManifest& corpus, double heldout_fraction,
                                                        std::uint64_t seed) {
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) throw config_error("heldout_fraction must lie in (0, 1)");
    std::vector<CodeDocument> train, heldout;
    for (const auto& d : corpus.documents()) {
        const double u = static_cast<double>(hash64(std::to_string(seed) + ":" + d.doc_id) >> 11) * 0x1.0p-53;
        (u < heldout_fraction ? heldout : train).push_back(d);
    }
    if (train.empty() || heldout.empty())
        throw compute_error("held-out split left an empty side (" + std::to_string(train.size()) + " train, " +
                            std::to_string(heldout.size()) + " held out)");
    return {CorpusManifest(std::move(train), corpus.provenance()), CorpusManifest(std::move(heldout), corpus.provenance())};
}

std::string_view anchor_name(Anchor a) noexcept {
    switch (a) {
        case Anchor::any: return "any";
        case Anchor::line_start: return "line_start";
        case Anchor::after_open: return "after_open";
    }
    return "any";
}

Anchor parse_anchor(std::string_view name) {
    for (auto a : {Anchor::any, Anchor::line_start, Anchor::after_open})
        if (anchor_name(a) == name) return a;
    throw config_error("unknown anchor '" + std::string(name) + "'");
}

std::vector<CompletionBenchmark> default_completion_suite() {
    return {
        {"generation", "next-line", 4, 60, Anchor::line_start},
        {"generation", "continue", 5, 60, Anchor::any},
        {"explanation", "short-span", 2, 80, Anchor::any},
        {"explanation", "call-args", 3, 60, Anchor::after_open},
        {"reasoning", "expression", 3, 60, Anchor::any},
        {"reasoning", "argument-list", 4, 40, Anchor::after_open},
        {"repair", "single-token", 1, 100, Anchor::any},
        {"repair", "line-head", 2, 60, Anchor::line_start},
    };
}

std::vector<CompletionInstance> sample_instances(const CorpusManifest& heldout, Segmentation seg,
                                                 const CompletionBenchmark& bench, std::uint64_t seed) {
    if (bench.span_tokens == 0 || bench.instances == 0)
        throw config_error("benchmark '" + bench.benchmark + "' needs span_tokens and instances >= 1");
    std::vector<CompletionInstance> pool;
    for (std::size_t d = 0; d < heldout.size(); ++d)
        for (auto pos : eligible_positions(segment(heldout.documents()[d].content, seg), bench.anchor, bench.span_tokens))
            pool.push_back({d, pos});
    if (pool.size() < bench.instances)
        throw compute_error("benchmark '" + bench.benchmark + "' has only " + std::to_string(pool.size()) +
                            " eligible positions for " + std::to_string(bench.instances) + " instances");
    std::mt19937_64 rng(seed ^ hash64(bench.task + "/" + bench.benchmark));
    for (std::size_t i = 0; i < bench.instances; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(bench.instances);
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return std::tie(a.doc, a.position) < std::tie(b.doc, b.position); });
    return pool;
}

std::vector<BenchmarkResult> run_completion_suite(const NGramModel& model, const CorpusManifest& heldout,
                                                  const std::vector<CompletionBenchmark>& suite, std::uint64_t seed,
                                                  std::size_t workers) {
    std::vector<std::vector<TokenId>> ids(heldout.size());
    parallel_for(heldout.size(), workers, [&](std::size_t d) {
        ids[d] = model.encode(segment(heldout.documents()[d].content, model.segmentation()));
    });
    const std::size_t reach = model.order() - 1;
    std::vector<BenchmarkResult> out;
    for (const auto& bench : suite) {
        const auto instances = sample_instances(heldout, model.segmentation(), bench, seed);
        std::vector<char> hit(instances.size(), 0);
        parallel_for(instances.size(), workers, [&](std::size_t k) {
            const auto& doc = ids[instances[k].doc];
            const std::size_t pos = instances[k].position;
            std::vector<TokenId> ctx(doc.begin() + static_cast<std::ptrdiff_t>(pos - std::min(reach, pos)),
                                     doc.begin() + static_cast<std::ptrdiff_t>(pos));
            for (std::size_t s = 0; s < bench.span_tokens; ++s) {
                const TokenId next = model.argmax(ctx);
                if (next != doc[pos + s]) return;
                ctx.push_back(next);
                if (ctx.size() > reach) ctx.erase(ctx.begin());
            }
            hit[k] = 1;
        });
        const auto matches = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
        out.push_back({bench.task, bench.benchmark, instances.size(), matches / static_cast<double>(instances.size())});
    }
    return out;
}

}  // namespace codebpc
