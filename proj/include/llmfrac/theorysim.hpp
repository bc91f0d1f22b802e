#pragma once

// Fully synthetic occurrence-model generators and an empirical check of how
// the alpha estimation error decays with the number of target units.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llmfrac/corpus.hpp"
#include "llmfrac/mle.hpp"
#include "llmfrac/occmodel.hpp"
#include "llmfrac/vocab.hpp"

namespace llmfrac {

class SyntheticGenerator {
public:
    /// p and q strictly inside (0, 1), equal length, differing somewhere.
    SyntheticGenerator(Eigen::VectorXd p, Eigen::VectorXd q, double alpha_true);

    /// p_t ~ Uniform(p_low, p_high); q = p except n_shifted randomly chosen tokens get +shift.
    static SyntheticGenerator shifted(std::size_t vocab_size, double p_low, double p_high, std::size_t n_shifted,
                                      double shift, double alpha_true, std::uint64_t seed);

    std::size_t vocab_size() const { return static_cast<std::size_t>(p_.size()); }
    const Eigen::VectorXd& p() const { return p_; }
    const Eigen::VectorXd& q() const { return q_; }
    double alpha_true() const { return alpha_true_; }
    SyntheticGenerator with_alpha(double alpha_true) const { return {p_, q_, alpha_true}; }

    /// Token names "w0000", "w0001", ... (sorted order equals index order).
    const std::shared_ptr<const Vocabulary>& vocabulary() const { return vocab_; }
    OccurrenceModel human_model() const { return {vocab_, p_, 0, "human"}; }
    OccurrenceModel ai_model() const { return {vocab_, q_, 0, "ai"}; }

private:
    Eigen::VectorXd p_, q_;
    double alpha_true_;
    std::shared_ptr<const Vocabulary> vocab_;
};

/// Each unit is AI with probability alpha_true; each token then appears independently.
std::vector<Unit> sample_units(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed);

/// Scored units drawn like sample_units, scored under the generator's own models.
ScoredUnits sample_scored(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed);

/// Documents whose text is the unit's tokens joined by spaces.
std::vector<RawDocument> units_to_documents(const std::vector<Unit>& units, const std::string& id_prefix);

struct GeneratorConstants {
    double kappa_hat = 0.0;      // min over sampled units of |P - Q| / max(P^2, Q^2)
    double log_kappa_hat = 0.0;
    double c_hat = 0.0;          // max over sampled units of |log P|, |log Q|
    std::size_t sample_size = 0;
};

GeneratorConstants measure_constants(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed);

struct ScalingRow {
    std::size_t n = 0;
    double mean_abs_error = 0.0;
    std::size_t repetitions = 0;
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    double slope = 0.0;  // least-squares slope of log(mean_abs_error) on log(n)
    double delta = 0.05;
    GeneratorConstants constants;
    bool refit = false;
    std::size_t reference_units = 0;

    /// One-line JSON header followed by n,mean_abs_error,reps rows.
    std::string to_csv() const;
};

struct ScalingOptions {
    double delta = 0.05;
    /// Fit models from finite reference corpora instead of using the true probabilities.
    bool refit = false;
    std::size_t reference_units = 20000;
    std::size_t calibration_units = 2000;
};

ScalingReport error_scaling(const SyntheticGenerator& gen, const std::vector<std::size_t>& ns, std::size_t reps,
                            std::uint64_t seed, const ScalingOptions& options = {});

}  // namespace llmfrac
