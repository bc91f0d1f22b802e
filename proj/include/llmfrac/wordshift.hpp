#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmfrac/corpus.hpp"
#include "llmfrac/occmodel.hpp"

namespace llmfrac {

struct ShiftRow {
    std::string token;
    double p = 0.0;         // human occurrence probability
    double q = 0.0;         // AI occurrence probability
    double fold = 0.0;      // q / p
    double log_odds = 0.0;  // log[(q / (1 - q)) / (p / (1 - p))]
};

ShiftRow shift_row(std::string token, double p, double q);

/// Rows ordered by log_odds descending (ties by token), truncated to top_k.
std::vector<ShiftRow> shift_table(const OccurrenceModel& human_model, const OccurrenceModel& ai_model,
                                  std::size_t top_k);

std::string shift_table_csv(const std::vector<ShiftRow>& rows);

enum class BinKind { Month, Quarter, Year };

BinKind parse_bin_kind(std::string_view s);
std::string_view to_string(BinKind kind);

/// "YYYY-MM", "YYYYQn" or "YYYY".
std::string bin_label(const Date& date, BinKind kind);

struct DatedUnit {
    Date date;
    Unit unit;
};

/// Units tagged with their source document's date; undated documents are an error.
std::vector<DatedUnit> dated_units(const std::vector<RawDocument>& docs, UnitKind kind, std::size_t min_words = 2);

/// Raw per-bin share of units containing token. Empty bins are omitted.
std::vector<std::pair<std::string, double>> frequency_series(const std::vector<DatedUnit>& units,
                                                             std::string_view token, BinKind kind);

std::string frequency_series_csv(const std::vector<std::pair<std::string, double>>& series);

}  // namespace llmfrac
