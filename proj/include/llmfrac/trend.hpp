#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "llmfrac/corpus.hpp"
#include "llmfrac/occmodel.hpp"
#include "llmfrac/wordshift.hpp"

namespace llmfrac {

struct TrendRow {
    std::string bin;
    std::string group;  // "all" unless stratified
    double alpha = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t n_sampled = 0;    // documents
    std::size_t n_available = 0;  // documents
    std::size_t n_units = 0;
};

struct TrendSeries {
    std::vector<TrendRow> rows;  // sorted by (group, bin)
    BinKind bin_kind = BinKind::Month;
    std::size_t cap = 2000;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    /// bin,group,alpha,ci_low,ci_high,n_sampled,n_available
    std::string to_csv() const;
};

struct TrendOptions {
    BinKind bin = BinKind::Month;
    std::size_t cap = 2000;
    bool stratify_by_group = false;
    std::size_t iters = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    UnitKind unit_kind = UnitKind::Sentence;
    std::size_t min_words = 2;
};

/// Each (group, bin) bucket samples up to cap documents without replacement
/// and is estimated independently of every other bucket.
TrendSeries estimate_trend(const std::vector<RawDocument>& docs, const OccurrenceModel& human_model,
                           const OccurrenceModel& ai_model, const TrendOptions& options);

}  // namespace llmfrac
