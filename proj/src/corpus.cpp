#include "llmfrac/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "llmfrac/error.hpp"
#include "llmfrac/parallel.hpp"

namespace llmfrac {

namespace {

constexpr std::size_t kMaxLineBytes = 16u << 20;

// Abbreviations whose trailing period never ends a sentence.
constexpr std::array<std::string_view, 14> kAbbreviations = {
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "et al.", "e.g.", "i.e.",
    "Fig.", "Figs.", "Eq.", "Eqs.", "vs.", "cf."};

struct CodePoint {
    UChar32 cp;
    std::size_t begin;
    std::size_t end;
};

std::vector<CodePoint> decode(std::string_view s) {
    std::vector<CodePoint> out;
    out.reserve(s.size());
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    while (i < len) {
        const int32_t start = i;
        UChar32 c;
        U8_NEXT(bytes, i, len, c);
        if (c < 0) c = 0xFFFD;  // ill-formed sequence
        out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
    }
    return out;
}

bool is_word_char(UChar32 c) { return u_isalpha(c) || u_isdigit(c); }

bool is_mark(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0; }

bool is_connector(UChar32 c) { return c == '-' || c == '\'' || c == 0x2019; }

void append_folded(std::string& out, UChar32 c) {
    const UChar32 f = u_foldCase(c, U_FOLD_CASE_DEFAULT);
    char buf[U8_MAX_LENGTH];
    int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, f);
    out.append(buf, static_cast<std::size_t>(n));
}

bool is_space_at(std::string_view text, std::size_t pos, std::size_t* next) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    auto i = static_cast<int32_t>(pos);
    UChar32 c;
    U8_NEXT(bytes, i, static_cast<int32_t>(text.size()), c);
    if (next) *next = static_cast<std::size_t>(i);
    return c >= 0 && u_isUWhiteSpace(c);
}

bool ends_with_abbreviation(std::string_view segment) {
    for (auto abbr : kAbbreviations) {
        if (segment.size() < abbr.size()) continue;
        if (segment.substr(segment.size() - abbr.size()) != abbr) continue;
        if (segment.size() == abbr.size()) return true;
        const unsigned char before = static_cast<unsigned char>(segment[segment.size() - abbr.size() - 1]);
        if (before < 0x80 && !std::isalnum(before)) return true;
    }
    return false;
}

std::string_view trim(std::string_view s) {
    auto cps = decode(s);
    std::size_t b = 0, e = cps.size();
    while (b < e && u_isUWhiteSpace(cps[b].cp)) ++b;
    while (e > b && u_isUWhiteSpace(cps[e - 1].cp)) --e;
    if (b == e) return {};
    return s.substr(cps[b].begin, cps[e - 1].end - cps[b].begin);
}

Unit make_unit(const std::string& doc_id, std::size_t index, std::vector<std::string> tokens) {
    Unit u;
    u.doc_id = doc_id;
    u.index = index;
    u.token_count = tokens.size();
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    u.tokens = std::move(tokens);
    return u;
}

}  // namespace

bool Unit::contains(std::string_view token) const {
    return std::binary_search(tokens.begin(), tokens.end(), token);
}

UnitKind parse_unit_kind(std::string_view s) {
    if (s == "sentence") return UnitKind::Sentence;
    if (s == "document") return UnitKind::Document;
    throw UsageError("unknown unit kind '" + std::string(s) + "' (expected sentence|document)");
}

std::string_view to_string(UnitKind kind) {
    return kind == UnitKind::Sentence ? "sentence" : "document";
}

Date parse_date(std::string_view s) {
    auto fail = [&] { return Error("invalid date '" + std::string(s) + "'"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw fail();
    int y = 0;
    unsigned m = 0, d = 0;
    auto num = [&](std::size_t off, std::size_t len, auto& out) {
        for (std::size_t i = off; i < off + len; ++i)
            if (s[i] < '0' || s[i] > '9') throw fail();
        std::from_chars(s.data() + off, s.data() + off + len, out);
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) throw fail();
    return date;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::vector<RawDocument> parse_jsonl(std::string_view content) {
    std::vector<RawDocument> docs;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string_view::npos) eol = content.size();
        std::string_view line = content.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        const std::string at = " at line " + std::to_string(line_no);
        if (line.size() > kMaxLineBytes) throw Error("line exceeds 16 MiB" + at);

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error("malformed JSON" + at + ": " + e.what());
        }
        if (!obj.is_object()) throw Error("expected a JSON object" + at);

        RawDocument doc;
        for (const char* field : {"id", "text"}) {
            auto it = obj.find(field);
            if (it == obj.end()) throw Error(std::string("missing field ") + field + at);
            if (!it->is_string()) throw Error(std::string("field ") + field + " must be a string" + at);
        }
        doc.id = obj["id"].get<std::string>();
        doc.text = obj["text"].get<std::string>();
        if (doc.id.empty()) throw Error("empty id" + at);
        if (auto it = obj.find("date"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw Error("field date must be a string" + at);
            try {
                doc.date = parse_date(it->get<std::string>());
            } catch (const Error& e) {
                throw Error(e.what() + at);
            }
        }
        if (auto it = obj.find("group"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) throw Error("field group must be a string" + at);
            doc.group = it->get<std::string>();
        }
        if (!seen.insert(doc.id).second) throw Error("duplicate id '" + doc.id + "'" + at);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<RawDocument> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_jsonl(ss.str());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_jsonl(const std::filesystem::path& path, const std::vector<RawDocument>& docs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& d : docs) {
        nlohmann::json obj{{"id", d.id}, {"text", d.text}};
        if (d.date) obj["date"] = format_date(*d.date);
        if (d.group) obj["group"] = *d.group;
        out << obj.dump() << '\n';
    }
}

std::vector<std::pair<std::size_t, std::string>> segment_sentences(std::string_view text) {
    std::vector<std::pair<std::size_t, std::string>> out;
    auto emit = [&](std::string_view seg) {
        seg = trim(seg);
        if (!seg.empty()) out.emplace_back(out.size(), std::string(seg));
    };

    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch != '.' && ch != '!' && ch != '?') continue;
        const std::size_t after = i + 1;
        bool split = false;
        if (after == text.size()) {
            split = true;
        } else {
            std::size_t j = after;
            std::size_t next = 0;
            if (!is_space_at(text, j, &next)) continue;
            while (j < text.size() && is_space_at(text, j, &next)) j = next;
            if (j == text.size()) {
                split = true;
            } else {
                const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
                auto k = static_cast<int32_t>(j);
                UChar32 c;
                U8_NEXT(bytes, k, static_cast<int32_t>(text.size()), c);
                split = c >= 0 && (u_isupper(c) || u_istitle(c));
            }
        }
        if (!split) continue;
        if (ch == '.' && ends_with_abbreviation(text.substr(start, after - start))) continue;
        emit(text.substr(start, after - start));
        start = after;
    }
    if (start < text.size()) emit(text.substr(start));
    return out;
}

std::vector<std::pair<std::size_t, std::string>> segment_sentences(const RawDocument& doc) {
    return segment_sentences(doc.text);
}

std::vector<std::string> tokenize(std::string_view text) {
    const auto cps = decode(text);
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const UChar32 c = cps[i].cp;
        if (is_word_char(c) || (!current.empty() && is_mark(c))) {
            append_folded(current, c);
        } else if (is_connector(c) && !current.empty() && i + 1 < cps.size() &&
                   is_word_char(cps[i + 1].cp)) {
            current.push_back(c == '-' ? '-' : '\'');
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::string fold_token(std::string_view token) {
    std::string out;
    for (const auto& cp : decode(token)) append_folded(out, cp.cp);
    return out;
}

std::vector<Unit> to_units(const std::vector<RawDocument>& docs, UnitKind kind, std::size_t min_words) {
    if (min_words < 1) throw Error("min_words must be at least 1");
    std::vector<std::vector<Unit>> per_doc(docs.size());
    parallel_for(docs.size(), [&](std::size_t d) {
        const auto& doc = docs[d];
        auto& out = per_doc[d];
        if (kind == UnitKind::Document) {
            auto toks = tokenize(doc.text);
            if (!toks.empty()) out.push_back(make_unit(doc.id, 0, std::move(toks)));
            return;
        }
        for (auto& [index, sentence] : segment_sentences(doc.text)) {
            auto toks = tokenize(sentence);
            if (toks.size() >= min_words) out.push_back(make_unit(doc.id, index, std::move(toks)));
        }
    });
    std::vector<Unit> units;
    for (auto& v : per_doc)
        for (auto& u : v) units.push_back(std::move(u));
    return units;
}

}  // namespace llmfrac
