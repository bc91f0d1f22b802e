#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "llmfrac/corpus.hpp"

namespace llmfrac {

enum class PosTag { Adj, Adv, Verb, Noun, Other };

PosTag parse_pos_tag(std::string_view s);
std::string_view to_string(PosTag tag);

/// Most-frequent-tag lexicon: every word gets exactly one tag.
class PosLexicon {
public:
    void set(std::string_view token, PosTag tag);
    PosTag lookup(std::string_view token) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, PosTag> entries_;
};

/// Reads "token<TAB>TAG" lines. Later duplicates override earlier ones.
PosLexicon load_pos_lexicon(const std::filesystem::path& path);
PosLexicon parse_pos_lexicon(std::string_view content);

/// One token per line, '#' starts a comment.
std::set<std::string> load_exclusion_list(const std::filesystem::path& path);
std::set<std::string> parse_exclusion_list(std::string_view content);

enum class VocabMode { Full, Adj, Adv, Verb, Noun };

VocabMode parse_vocab_mode(std::string_view s);
std::string_view to_string(VocabMode mode);

inline constexpr std::size_t kDefaultMinDf = 5;

class Vocabulary {
public:
    Vocabulary() = default;
    /// tokens must be sorted and distinct.
    Vocabulary(std::vector<std::string> tokens, VocabMode mode, std::size_t min_df,
               std::set<std::string> excluded = {});

    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }
    VocabMode mode() const { return mode_; }
    std::size_t min_df() const { return min_df_; }
    const std::set<std::string>& excluded() const { return excluded_; }

    /// Position of token, or nullopt when out of vocabulary.
    std::optional<std::size_t> index_of(std::string_view token) const;

    /// Sorted in-vocabulary indices of the unit's tokens.
    std::vector<std::size_t> encode(const Unit& unit) const;

    bool same_tokens(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
    VocabMode mode_ = VocabMode::Full;
    std::size_t min_df_ = kDefaultMinDf;
    std::set<std::string> excluded_;
};

Vocabulary build_vocabulary(const std::vector<Unit>& human_units, const std::vector<Unit>& ai_units,
                            VocabMode mode, const PosLexicon* lexicon, std::size_t min_df,
                            const std::set<std::string>& exclude);

}  // namespace llmfrac
