#include "codebpc/tokenizer.hpp"

#include "codebpc/common.hpp"
#include "codebpc/unicode.hpp"

namespace codebpc {

namespace {

enum class CharClass { space, ident_start, digit, punct };

CharClass classify(char32_t c) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return CharClass::space;
    if (c >= '0' && c <= '9') return CharClass::digit;
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return CharClass::ident_start;
    if (c >= 0x80) {
        if (c == 0x00A0 || c == 0x2028 || c == 0x2029 || c == 0x3000 || c == 0xFEFF) return CharClass::space;
        return CharClass::ident_start;
    }
    return CharClass::punct;
}

bool continues_identifier(CharClass c) { return c == CharClass::ident_start || c == CharClass::digit; }

// Calls emit(begin, end, is_space) for every piece in order.
template <typename Emit>
void scan(std::string_view text, Emit&& emit) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t begin = pos;
        const CharClass first = classify(utf8::decode_next(text, pos));
        auto extend = [&](auto&& pred) {
            while (pos < text.size()) {
                std::size_t probe = pos;
                if (!pred(classify(utf8::decode_next(text, probe)))) break;
                pos = probe;
            }
        };
        switch (first) {
            case CharClass::space:
                extend([](CharClass c) { return c == CharClass::space; });
                emit(begin, pos, true);
                break;
            case CharClass::ident_start:
                extend(continues_identifier);
                emit(begin, pos, false);
                break;
            case CharClass::digit:
                extend([](CharClass c) { return c == CharClass::digit; });
                emit(begin, pos, false);
                break;
            case CharClass::punct:
                emit(begin, pos, false);
                break;
        }
    }
}

}  // namespace

std::vector<std::string> tokenize_simple(std::string_view content) {
    std::vector<std::string> out;
    scan(content, [&](std::size_t b, std::size_t e, bool space) {
        if (!space) out.emplace_back(content.substr(b, e - b));
    });
    return out;
}

std::size_t count_tokens_simple(std::string_view content) {
    std::size_t n = 0;
    scan(content, [&](std::size_t, std::size_t, bool space) { n += space ? 0 : 1; });
    return n;
}

std::vector<std::string> segment(std::string_view content, Segmentation mode) {
    std::vector<std::string> out;
    switch (mode) {
        case Segmentation::chars:
        case Segmentation::pairs: {
            const std::size_t step = mode == Segmentation::chars ? 1 : 2;
            const auto cuts = utf8::boundaries(content);
            for (std::size_t i = 0; i + 1 < cuts.size(); i += step) {
                const std::size_t end = cuts[std::min(i + step, cuts.size() - 1)];
                out.emplace_back(content.substr(cuts[i], end - cuts[i]));
            }
            break;
        }
        case Segmentation::lexical:
            scan(content, [&](std::size_t b, std::size_t e, bool) { out.emplace_back(content.substr(b, e - b)); });
            break;
    }
    return out;
}

std::string_view segmentation_name(Segmentation mode) noexcept {
    switch (mode) {
        case Segmentation::chars: return "chars";
        case Segmentation::pairs: return "pairs";
        case Segmentation::lexical: return "lexical";
    }
    return "chars";
}

Segmentation parse_segmentation(std::string_view name) {
    if (name == "chars") return Segmentation::chars;
    if (name == "pairs") return Segmentation::pairs;
    if (name == "lexical") return Segmentation::lexical;
    throw config_error("unknown segmentation '" + std::string(name) + "'");
}

}  // namespace codebpc
