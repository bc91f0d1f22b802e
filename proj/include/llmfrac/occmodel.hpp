#pragma once

// Per-token occurrence model: each vocabulary token appears in a unit
// independently with probability prob_t. A unit's likelihood is
//
//   P(x) = prod_{t in x} prob_t * prod_{t not in x} (1 - prob_t)
//
// evaluated sparsely as base_log_mass + sum_{t in x} log(prob_t / (1 - prob_t)).

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llmfrac/corpus.hpp"
#include "llmfrac/vocab.hpp"

namespace llmfrac {

inline constexpr int kModelFormatVersion = 1;

class OccurrenceModel {
public:
    /// probs must lie strictly inside (0, 1), one per vocabulary token.
    OccurrenceModel(std::shared_ptr<const Vocabulary> vocab, Eigen::VectorXd probs, std::size_t n_units,
                    std::string label);

    const Vocabulary& vocab() const { return *vocab_; }
    const std::shared_ptr<const Vocabulary>& vocab_ptr() const { return vocab_; }
    const Eigen::VectorXd& probs() const { return probs_; }
    /// log(prob_t) - log(1 - prob_t)
    const Eigen::VectorXd& presence_weights() const { return presence_weight_; }
    double base_log_mass() const { return base_log_mass_; }
    std::size_t n_units() const { return n_units_; }
    const std::string& label() const { return label_; }

    /// Unsmoothed occurrence rate count_t / n_units, recovered from the smoothed probability.
    double raw_rate(std::size_t token_index) const;

    double log_likelihood(std::span<const std::size_t> token_indices) const {
        double ll = base_log_mass_;
        for (auto i : token_indices) ll += presence_weight_[static_cast<Eigen::Index>(i)];
        return ll;
    }

private:
    std::shared_ptr<const Vocabulary> vocab_;
    Eigen::VectorXd probs_;
    Eigen::VectorXd presence_weight_;
    double base_log_mass_ = 0.0;
    std::size_t n_units_ = 0;
    std::string label_;
};

/// Jeffreys add-half estimate (count_t + 0.5) / (n + 1).
OccurrenceModel fit_model(const std::vector<Unit>& units, std::shared_ptr<const Vocabulary> vocab,
                          std::string label);

/// Out-of-vocabulary tokens contribute nothing.
double unit_log_likelihood(const OccurrenceModel& model, const Unit& unit);

void save_model(const OccurrenceModel& model, const std::filesystem::path& path);
std::string serialize_model(const OccurrenceModel& model);
OccurrenceModel load_model(const std::filesystem::path& path);
OccurrenceModel parse_model(std::string_view content);

}  // namespace llmfrac
