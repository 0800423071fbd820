#include "codebpc/corpus.hpp"

#include "codebpc/common.hpp"
#include "codebpc/sampling.hpp"
#include "codebpc/unicode.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace codebpc {

using nlohmann::json;
namespace fs = std::filesystem;

std::string language_for_path(const fs::path& path) {
    static const std::unordered_map<std::string, std::string> table = {
        {".py", "Python"},      {".js", "JavaScript"}, {".mjs", "JavaScript"}, {".ts", "TypeScript"},
        {".tsx", "TypeScript"}, {".java", "Java"},     {".c", "C"},            {".h", "C"},
        {".cc", "C++"},         {".cpp", "C++"},       {".cxx", "C++"},        {".hpp", "C++"},
        {".hh", "C++"},         {".cs", "C#"},         {".go", "Go"},          {".rs", "Rust"},
        {".rb", "Ruby"},        {".php", "PHP"},       {".kt", "Kotlin"},      {".swift", "Swift"},
        {".scala", "Scala"},    {".sh", "Shell"},      {".bash", "Shell"},     {".pl", "Perl"},
        {".pm", "Perl"},        {".sql", "SQL"},       {".vue", "Vue"},        {".lua", "Lua"},
        {".r", "R"},            {".jl", "Julia"},      {".dart", "Dart"},      {".hs", "Haskell"},
        {".m", "Objective-C"},  {".html", "HTML"},     {".css", "CSS"},
    };
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto it = table.find(ext);
    return it == table.end() ? std::string{} : it->second;
}

namespace {

struct RawFile {
    std::string rel_path;
    std::string bytes;
};

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw input_error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::uint64_t parse_octal(std::string_view field) {
    std::uint64_t v = 0;
    for (char c : field) {
        if (c == '\0' || c == ' ') {
            if (v != 0) break;
            continue;
        }
        if (c < '0' || c > '7') throw input_error("corrupt tar header (size field)");
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

std::string cstr_field(std::string_view block, std::size_t off, std::size_t len) {
    auto f = block.substr(off, len);
    return std::string(f.substr(0, f.find('\0')));
}

std::vector<RawFile> read_tar(const fs::path& archive) {
    const std::string data = read_all(archive);
    std::vector<RawFile> out;
    std::string long_name;
    std::size_t pos = 0;
    while (pos + 512 <= data.size()) {
        std::string_view header(data.data() + pos, 512);
        if (header.find_first_not_of('\0') == std::string_view::npos) break;
        const std::uint64_t size = parse_octal(header.substr(124, 12));
        const char type = header[156];
        std::string name = cstr_field(header, 0, 100);
        if (header.substr(257, 5) == "ustar") {
            const std::string prefix = cstr_field(header, 345, 155);
            if (!prefix.empty()) name = prefix + "/" + name;
        }
        const std::size_t body = pos + 512;
        if (body + size > data.size()) throw input_error(archive.string() + ": truncated tar entry '" + name + "'");
        std::string_view payload(data.data() + body, size);
        if (type == 'L') {
            long_name = std::string(payload.substr(0, payload.find('\0')));
        } else if (type == 'x') {
            // pax records: "<len> key=value\n"
            std::size_t p = 0;
            while (p < payload.size()) {
                const auto sp = payload.find(' ', p);
                if (sp == std::string_view::npos) break;
                const auto len = std::stoul(std::string(payload.substr(p, sp - p)));
                const auto rec = payload.substr(sp + 1, len - (sp - p) - 2);
                if (rec.starts_with("path=")) long_name = std::string(rec.substr(5));
                p += len;
            }
        } else {
            if (!long_name.empty()) name = std::exchange(long_name, {});
            if (type == '0' || type == '\0') out.push_back({name, std::string(payload)});
        }
        pos = body + (size + 511) / 512 * 512;
    }
    return out;
}

std::vector<RawFile> read_tree(const fs::path& root) {
    std::vector<RawFile> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        out.push_back({fs::relative(entry.path(), root).generic_string(), read_all(entry.path())});
    }
    return out;
}

struct SidecarEntry {
    std::string repo_id;
    std::string language;
    std::optional<std::string> created_at;
};

std::unordered_map<std::string, SidecarEntry> read_sidecar(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open metadata file " + path.string());
    std::unordered_map<std::string, SidecarEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
        try {
            const json obj = json::parse(line);
            std::string key = obj.contains("path") ? obj["path"].get<std::string>() : obj.at("doc_id").get<std::string>();
            SidecarEntry e;
            e.repo_id = obj.value("repo_id", "");
            e.language = obj.value("language", "");
            if (obj.contains("created_at") && !obj["created_at"].is_null()) e.created_at = obj["created_at"].get<std::string>();
            out[std::move(key)] = std::move(e);
        } catch (const json::exception& e) {
            throw input_error(where + e.what());
        }
    }
    return out;
}

}  // namespace

std::vector<IngestedDocument> ingest(const fs::path& input, const std::optional<fs::path>& sidecar) {
    std::vector<RawFile> files;
    if (fs::is_directory(input)) {
        files = read_tree(input);
    } else if (fs::is_regular_file(input) && input.extension() == ".tar") {
        files = read_tar(input);
    } else {
        throw input_error("input must be a directory or .tar archive: " + input.string());
    }
    std::unordered_map<std::string, SidecarEntry> meta;
    if (sidecar) meta = read_sidecar(*sidecar);

    std::vector<IngestedDocument> out;
    for (auto& f : files) {
        SidecarEntry m;
        if (auto it = meta.find(f.rel_path); it != meta.end()) m = it->second;
        std::string lang = m.language.empty() ? language_for_path(f.rel_path) : m.language;
        if (lang.empty()) continue;
        IngestedDocument d;
        d.doc = make_document(f.rel_path, std::move(lang), utf8::sanitize(f.bytes), m.repo_id);
        d.created_at_text = m.created_at;
        if (m.created_at) {
            try {
                d.doc.created_at = parse_date(*m.created_at);
            } catch (const Error&) {
                // left unset; the timestamp stage reports it
            }
        }
        out.push_back(std::move(d));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.doc.doc_id < b.doc.doc_id; });
    return out;
}

CorpusBuildResult build_corpus(std::vector<IngestedDocument> input, const CorpusBuildConfig& cfg) {
    std::sort(input.begin(), input.end(), [](const auto& a, const auto& b) { return a.doc.doc_id < b.doc.doc_id; });
    for (std::size_t i = 1; i < input.size(); ++i)
        if (input[i].doc.doc_id == input[i - 1].doc.doc_id)
            throw input_error("duplicate doc_id '" + input[i].doc.doc_id + "'");

    CorpusBuildResult result;
    const BoilerplateStripper stripper(cfg.boilerplate);
    const QualityFilter quality(cfg.quality_rules);

    // Per-document stages are pure; run them in parallel and reduce in doc_id order.
    std::vector<std::optional<Rejection>> verdict(input.size());
    std::vector<std::size_t> stage_of(input.size(), 0);
    parallel_for(input.size(), cfg.workers, [&](std::size_t i) {
        auto& item = input[i];
        auto stripped = stripper.strip(item.doc);
        item.doc = std::move(stripped.doc);
        if (stripped.emptied) {
            verdict[i] = Rejection{item.doc.doc_id, "strip_boilerplate", "empty after stripping"};
            stage_of[i] = 0;
            return;
        }
        if (auto d = filter_min_tokens(item.doc, cfg.min_tokens); !d.keep) {
            verdict[i] = Rejection{item.doc.doc_id, "min_tokens", d.reason};
            stage_of[i] = 1;
            return;
        }
        if (cfg.window) {
            FilterDecision d = item.doc.created_at ? filter_timestamp(item.doc, *cfg.window)
                               : item.created_at_text ? filter_timestamp(*item.created_at_text, *cfg.window)
                                                      : filter_timestamp(item.doc, *cfg.window);
            if (!d.keep) {
                verdict[i] = Rejection{item.doc.doc_id, "timestamp", d.reason};
                stage_of[i] = 2;
                return;
            }
        }
        if (auto d = quality.check(item.doc); !d.keep) {
            verdict[i] = Rejection{item.doc.doc_id, "quality", d.reason};
            stage_of[i] = 3;
        }
    });

    const char* stage_names[] = {"strip_boilerplate", "min_tokens", "timestamp", "quality"};
    std::size_t alive = input.size();
    for (std::size_t s = 0; s < 4; ++s) {
        StageAttrition a{stage_names[s], alive, alive};
        for (std::size_t i = 0; i < input.size(); ++i)
            if (verdict[i] && stage_of[i] == s) {
                --a.out;
                result.rejections.push_back(*verdict[i]);
            }
        alive = a.out;
        if (s == 2 && !cfg.window) continue;
        if (s == 3 && quality.empty()) continue;
        result.attrition.push_back(a);
    }

    std::vector<CodeDocument> survivors;
    for (std::size_t i = 0; i < input.size(); ++i)
        if (!verdict[i]) survivors.push_back(std::move(input[i].doc));

    std::vector<std::string> notes;
    notes.push_back("strip_boilerplate: header_pattern=" + cfg.boilerplate.header_pattern);
    notes.push_back("min_tokens: " + std::to_string(cfg.min_tokens));
    if (cfg.window) notes.push_back("timestamp: [" + format_date(cfg.window->start) + ", " + format_date(cfg.window->end) + "]");
    for (const auto& r : cfg.quality_rules) notes.push_back("quality: " + r.name + " <= " + std::to_string(r.max_fraction));
    CorpusManifest manifest(std::move(survivors), std::move(notes));

    if (cfg.dedup) {
        DedupConfig dc = cfg.dedup_cfg;
        dc.workers = cfg.workers;
        const std::size_t before = manifest.size();
        auto dedup = lsh_dedup(manifest, dc);
        for (const auto& r : dedup.removed)
            result.rejections.push_back({r.removed, "dedup", "near-duplicate of " + r.representative});
        manifest = std::move(dedup.kept);
        result.attrition.push_back({"dedup", before, manifest.size()});
    }
    if (cfg.sample) {
        const std::size_t before = manifest.size();
        manifest = weighted_sample(manifest, cfg.sample->fractions, cfg.sample->total_tokens, cfg.seed);
        result.attrition.push_back({"weighted_sample", before, manifest.size()});
    }
    result.manifest = std::move(manifest);
    return result;
}

json manifest_stats(const CorpusManifest& manifest) {
    json fractions = json::array();
    if (!manifest.empty() && manifest.total_tokens() > 0)
        for (const auto& [lang, frac] : distribution_report(manifest)) fractions.push_back({{"language", lang}, {"fraction", frac}});
    std::uint64_t chars = 0;
    for (const auto& d : manifest.documents()) chars += d.char_count;
    return {{"documents", manifest.size()},
            {"tokens", manifest.total_tokens()},
            {"characters", chars},
            {"language_tokens", manifest.language_tokens()},
            {"language_fractions", fractions}};
}

json corpus_summary(const CorpusBuildResult& result, const std::string& config_hash) {
    json attrition = json::array();
    for (const auto& a : result.attrition) attrition.push_back({{"stage", a.stage}, {"in", a.in}, {"out", a.out}});
    json rejected = json::array();
    for (const auto& r : result.rejections)
        rejected.push_back({{"doc_id", r.doc_id}, {"stage", r.stage}, {"reason", r.reason}});
    json out = manifest_stats(result.manifest);
    out["kind"] = "corpus_summary";
    out["tool_version"] = kToolVersion;
    out["config_hash"] = config_hash;
    out["attrition"] = attrition;
    out["rejections"] = rejected;
    out["provenance"] = result.manifest.provenance();
    return out;
}

}  // namespace codebpc
