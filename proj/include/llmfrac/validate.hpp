#pragma once

// Validation against synthetic target corpora of known alpha, built by
// sampling with replacement from held-out human and AI pools.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "llmfrac/corpus.hpp"
#include "llmfrac/mle.hpp"
#include "llmfrac/occmodel.hpp"

namespace llmfrac {

struct ValidationRow {
    double alpha_true = 0.0;
    double alpha_est = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double abs_error = 0.0;
    std::size_t n = 0;
};

struct ValidationReport {
    std::vector<ValidationRow> rows;
    std::uint64_t seed = 0;
    std::string config;

    double max_abs_error() const;
    double mean_abs_error() const;
    /// alpha_true,alpha_est,ci_low,ci_high,abs_error,n with 6 decimals.
    std::string to_csv() const;
};

/// round-half-to-even(alpha * n)
std::size_t ai_share(double alpha, std::size_t n);

/// ai_share(alpha, n) AI units and the rest human, drawn with replacement and shuffled.
std::vector<Unit> make_mixture(const std::vector<Unit>& human_units, const std::vector<Unit>& ai_units,
                               double alpha_true, std::size_t n, std::uint64_t seed);

/// "start:stop:step" (inclusive grid) or a comma-separated list.
std::vector<double> parse_alpha_grid(std::string_view spec);

/// 0 to 0.25 in 0.025 steps.
std::vector<double> default_alpha_grid();

struct SweepOptions {
    std::vector<double> alphas = default_alpha_grid();
    std::size_t n = 30000;
    std::size_t iters = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

ValidationReport sweep(const std::vector<Unit>& human_val, const std::vector<Unit>& ai_val,
                       const OccurrenceModel& human_model, const OccurrenceModel& ai_model,
                       const SweepOptions& options);

}  // namespace llmfrac
