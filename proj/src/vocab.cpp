#include "llmfrac/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "llmfrac/error.hpp"

namespace llmfrac {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
    std::size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string_view::npos) eol = content.size();
        std::string_view line = content.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(line, ++line_no);
        pos = eol + 1;
    }
}

std::string_view strip(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool has_letter(std::string_view token) {
    const auto* bytes = reinterpret_cast<const uint8_t*>(token.data());
    const auto len = static_cast<int32_t>(token.size());
    for (int32_t i = 0; i < len;) {
        UChar32 c;
        U8_NEXT(bytes, i, len, c);
        if (c >= 0 && u_isalpha(c)) return true;
    }
    return false;
}

bool mode_accepts(VocabMode mode, PosTag tag) {
    switch (mode) {
        case VocabMode::Full: return true;
        case VocabMode::Adj: return tag == PosTag::Adj;
        case VocabMode::Adv: return tag == PosTag::Adv;
        case VocabMode::Verb: return tag == PosTag::Verb;
        case VocabMode::Noun: return tag == PosTag::Noun;
    }
    return false;
}

}  // namespace

PosTag parse_pos_tag(std::string_view s) {
    if (s == "ADJ") return PosTag::Adj;
    if (s == "ADV") return PosTag::Adv;
    if (s == "VERB") return PosTag::Verb;
    if (s == "NOUN") return PosTag::Noun;
    if (s == "OTHER") return PosTag::Other;
    throw Error("unknown POS tag '" + std::string(s) + "'");
}

std::string_view to_string(PosTag tag) {
    switch (tag) {
        case PosTag::Adj: return "ADJ";
        case PosTag::Adv: return "ADV";
        case PosTag::Verb: return "VERB";
        case PosTag::Noun: return "NOUN";
        case PosTag::Other: return "OTHER";
    }
    return "OTHER";
}

void PosLexicon::set(std::string_view token, PosTag tag) { entries_[fold_token(token)] = tag; }

PosTag PosLexicon::lookup(std::string_view token) const {
    auto it = entries_.find(fold_token(token));
    return it == entries_.end() ? PosTag::Other : it->second;
}

PosLexicon parse_pos_lexicon(std::string_view content) {
    PosLexicon lex;
    for_each_line(content, [&](std::string_view line, std::size_t line_no) {
        if (strip(line).empty() || strip(line).front() == '#') return;
        const auto tab = line.find('\t');
        const std::string at = " at line " + std::to_string(line_no);
        if (tab == std::string_view::npos) throw Error("expected token<TAB>tag" + at);
        const auto token = strip(line.substr(0, tab));
        const auto tag = strip(line.substr(tab + 1));
        if (token.empty()) throw Error("empty token" + at);
        try {
            lex.set(token, parse_pos_tag(tag));
        } catch (const Error& e) {
            throw Error(e.what() + at);
        }
    });
    return lex;
}

PosLexicon load_pos_lexicon(const std::filesystem::path& path) {
    try {
        return parse_pos_lexicon(read_file(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::set<std::string> parse_exclusion_list(std::string_view content) {
    std::set<std::string> out;
    for_each_line(content, [&](std::string_view line, std::size_t) {
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = strip(line);
        if (!line.empty()) out.insert(fold_token(line));
    });
    return out;
}

std::set<std::string> load_exclusion_list(const std::filesystem::path& path) {
    return parse_exclusion_list(read_file(path));
}

VocabMode parse_vocab_mode(std::string_view s) {
    if (s == "full") return VocabMode::Full;
    if (s == "adj") return VocabMode::Adj;
    if (s == "adv") return VocabMode::Adv;
    if (s == "verb") return VocabMode::Verb;
    if (s == "noun") return VocabMode::Noun;
    throw UsageError("unknown vocabulary mode '" + std::string(s) + "' (expected full|adj|adv|verb|noun)");
}

std::string_view to_string(VocabMode mode) {
    switch (mode) {
        case VocabMode::Full: return "full";
        case VocabMode::Adj: return "adj";
        case VocabMode::Adv: return "adv";
        case VocabMode::Verb: return "verb";
        case VocabMode::Noun: return "noun";
    }
    return "full";
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, VocabMode mode, std::size_t min_df,
                       std::set<std::string> excluded)
    : tokens_(std::move(tokens)), mode_(mode), min_df_(min_df), excluded_(std::move(excluded)) {
    if (!std::is_sorted(tokens_.begin(), tokens_.end()) ||
        std::adjacent_find(tokens_.begin(), tokens_.end()) != tokens_.end())
        throw Error("vocabulary tokens must be sorted and distinct");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> Vocabulary::encode(const Unit& unit) const {
    std::vector<std::size_t> out;
    out.reserve(unit.tokens.size());
    for (const auto& t : unit.tokens)
        if (auto i = index_of(t)) out.push_back(*i);
    std::sort(out.begin(), out.end());
    return out;
}

Vocabulary build_vocabulary(const std::vector<Unit>& human_units, const std::vector<Unit>& ai_units,
                            VocabMode mode, const PosLexicon* lexicon, std::size_t min_df,
                            const std::set<std::string>& exclude) {
    if (mode != VocabMode::Full && lexicon == nullptr)
        throw UsageError("vocabulary mode '" + std::string(to_string(mode)) + "' requires a POS lexicon");

    std::map<std::string_view, std::size_t> df;
    for (const auto* corpus : {&human_units, &ai_units})
        for (const auto& u : *corpus)
            for (const auto& t : u.tokens) ++df[t];

    std::vector<std::string> tokens;
    for (const auto& [token, count] : df) {
        if (count < min_df) continue;
        if (exclude.contains(std::string(token))) continue;
        if (!has_letter(token)) continue;
        if (mode != VocabMode::Full && !mode_accepts(mode, lexicon->lookup(token))) continue;
        tokens.emplace_back(token);
    }
    if (tokens.empty()) throw Error("vocabulary empty after filtering");
    return Vocabulary(std::move(tokens), mode, min_df, exclude);
}

}  // namespace llmfrac
