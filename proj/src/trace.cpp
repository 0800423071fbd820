#include "codebpc/trace.hpp"

#include "codebpc/common.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace codebpc {

using nlohmann::json;

std::size_t DocumentTrace::char_count() const noexcept {
    std::size_t n = 0;
    for (auto c : char_lens) n += c;
    return n;
}

const DocumentTrace* LogProbTrace::find(std::string_view doc_id) const {
    auto it = std::lower_bound(documents.begin(), documents.end(), doc_id,
                               [](const DocumentTrace& d, std::string_view id) { return d.doc_id < id; });
    return it != documents.end() && it->doc_id == doc_id ? &*it : nullptr;
}

std::string trace_to_jsonl(const LogProbTrace& trace) {
    std::ostringstream out;
    json counts = json::object();
    for (const auto& d : trace.documents) counts[d.doc_id] = d.char_count();
    json header = {{"kind", "logprob_trace"},
                   {"model_name", trace.model_name},
                   {"context_window_used", trace.context_window_used},
                   {"tool_version", kToolVersion},
                   {"config_hash", trace.config_hash},
                   {"char_counts", counts}};
    out << header.dump() << '\n';
    std::vector<const DocumentTrace*> order;
    for (const auto& d : trace.documents) order.push_back(&d);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->doc_id < b->doc_id; });
    for (const auto* d : order) {
        for (std::size_t i = 0; i < d->size(); ++i) {
            json ev = {{"doc_id", d->doc_id}, {"token_index", i}, {"char_len", d->char_lens[i]}, {"logprob_nats", d->logprobs[i]}};
            if (!d->special.empty() && d->special[i]) ev["special"] = true;
            out << ev.dump() << '\n';
        }
    }
    return out.str();
}

void write_trace(const LogProbTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw output_error("cannot write trace " + path.string());
    out << trace_to_jsonl(trace);
    if (!out) throw output_error("write failed for " + path.string());
}

LogProbTrace parse_trace(std::string_view jsonl, const std::string& origin, const CorpusManifest* corpus) {
    LogProbTrace trace;
    std::map<std::string, std::size_t> declared;
    std::map<std::string, DocumentTrace> docs;
    std::map<std::string, std::size_t> first_line;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        const std::string_view line = jsonl.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        const auto where = origin + ":" + std::to_string(line_no) + ": ";
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw input_error(where + "parse error: " + e.what());
        }
        try {
            if (!have_header) {
                if (obj.value("kind", "") != "logprob_trace") throw input_error(where + "missing trace header");
                trace.model_name = obj.at("model_name").get<std::string>();
                trace.context_window_used = obj.at("context_window_used").get<std::size_t>();
                trace.config_hash = obj.value("config_hash", "");
                if (obj.contains("char_counts"))
                    declared = obj["char_counts"].get<std::map<std::string, std::size_t>>();
                have_header = true;
                continue;
            }
            const auto doc_id = obj.at("doc_id").get<std::string>();
            const auto index = obj.at("token_index").get<std::int64_t>();
            const auto char_len = obj.at("char_len").get<std::int64_t>();
            const double lp = obj.at("logprob_nats").get<double>();
            const bool special = obj.value("special", false);
            if (!std::isfinite(lp) || lp > 0.0)
                throw input_error(where + "logprob_nats must be finite and <= 0 (got " + std::to_string(lp) + ")");
            if (char_len < 0) throw input_error(where + "char_len must be >= 0");
            if (char_len == 0 && !special) throw input_error(where + "char_len 0 is only allowed for special tokens");
            auto& d = docs[doc_id];
            if (d.doc_id.empty()) {
                d.doc_id = doc_id;
                first_line[doc_id] = line_no;
            }
            if (index < 0 || static_cast<std::size_t>(index) != d.size()) {
                if (index >= 0 && static_cast<std::size_t>(index) > d.size())
                    throw input_error(where + "token_index gap for '" + doc_id + "': expected " + std::to_string(d.size()) +
                                      ", got " + std::to_string(index));
                throw input_error(where + "token_index not strictly increasing for '" + doc_id + "'");
            }
            d.char_lens.push_back(static_cast<std::uint32_t>(char_len));
            d.logprobs.push_back(lp);
            d.special.push_back(special);
        } catch (const json::exception& e) {
            throw input_error(where + e.what());
        }
    }
    if (!have_header) throw input_error(origin + ": empty trace file");

    for (auto& [id, d] : docs) {
        const auto line = origin + ":" + std::to_string(first_line[id]) + ": ";
        const std::size_t sum = d.char_count();
        if (auto it = declared.find(id); it != declared.end() && it->second != sum)
            throw input_error(line + "trace/corpus character mismatch for '" + id + "': events cover " +
                              std::to_string(sum) + " characters, header declares " + std::to_string(it->second));
        if (corpus) {
            const CodeDocument* doc = corpus->find(id);
            if (!doc) throw input_error(line + "document '" + id + "' not in corpus");
            if (doc->char_count != sum)
                throw input_error(line + "trace/corpus character mismatch for '" + id + "': events cover " +
                                  std::to_string(sum) + " characters, corpus has " + std::to_string(doc->char_count));
        }
        trace.documents.push_back(std::move(d));
    }
    for (const auto& [id, n] : declared)
        if (!docs.count(id)) throw input_error(origin + ": header declares '" + id + "' but no events follow");
    return trace;
}

LogProbTrace load_trace(const std::filesystem::path& path, const CorpusManifest* corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open trace " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str(), path.string(), corpus);
}

}  // namespace codebpc
