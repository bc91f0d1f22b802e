#pragma once

// Raw documents, sentence segmentation, tokenization and reduction of text
// to token-occurrence units.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace llmfrac {

using Date = std::chrono::year_month_day;

struct RawDocument {
    std::string id;
    std::string text;
    std::optional<Date> date;
    std::optional<std::string> group;
};

/// One sentence or document reduced to the set of its tokens.
struct Unit {
    std::string doc_id;
    std::size_t index = 0;
    std::vector<std::string> tokens;  // sorted, distinct
    std::size_t token_count = 0;      // word tokens before any vocabulary filter

    bool contains(std::string_view token) const;
    friend bool operator==(const Unit&, const Unit&) = default;
};

enum class UnitKind { Sentence, Document };

UnitKind parse_unit_kind(std::string_view s);
std::string_view to_string(UnitKind kind);

/// Parses "YYYY-MM-DD"; throws Error on malformed or impossible dates.
Date parse_date(std::string_view s);
std::string format_date(const Date& d);

std::vector<RawDocument> load_jsonl(const std::filesystem::path& path);
std::vector<RawDocument> parse_jsonl(std::string_view content);
void write_jsonl(const std::filesystem::path& path, const std::vector<RawDocument>& docs);

std::vector<std::pair<std::size_t, std::string>> segment_sentences(const RawDocument& doc);
std::vector<std::pair<std::size_t, std::string>> segment_sentences(std::string_view text);

std::vector<std::string> tokenize(std::string_view text);

/// Case-folds a single token the same way tokenize() does.
std::string fold_token(std::string_view token);

std::vector<Unit> to_units(const std::vector<RawDocument>& docs, UnitKind kind,
                           std::size_t min_words = 2);

}  // namespace llmfrac
