#pragma once

// Maximum-likelihood estimation of the mixture weight alpha in
//
//   L(alpha) = sum_i log((1 - alpha) P(x_i) + alpha Q(x_i))
//
// from per-unit log-likelihoods lp_i = log P(x_i), lq_i = log Q(x_i).
// L is concave in alpha, so a bracketed one-dimensional search finds the
// global maximum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "llmfrac/corpus.hpp"
#include "llmfrac/error.hpp"
#include "llmfrac/occmodel.hpp"

namespace llmfrac {

struct ScoredUnit {
    double lp = 0.0;
    double lq = 0.0;
};

/// Struct-of-arrays view of scored units.
template <typename Scalar>
struct ScoredUnitsT {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    Array lp;
    Array lq;

    ScoredUnitsT() = default;
    ScoredUnitsT(Array lp_, Array lq_) : lp(std::move(lp_)), lq(std::move(lq_)) {
        if (lp.size() != lq.size()) throw Error("lp and lq differ in length");
    }
    explicit ScoredUnitsT(std::span<const ScoredUnit> units) : lp(units.size()), lq(units.size()) {
        for (std::size_t i = 0; i < units.size(); ++i) {
            lp[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(units[i].lp);
            lq[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(units[i].lq);
        }
    }

    Eigen::Index size() const { return lp.size(); }
    bool empty() const { return lp.size() == 0; }
    ScoredUnit operator[](Eigen::Index i) const {
        return {static_cast<double>(lp[i]), static_cast<double>(lq[i])};
    }
};

using ScoredUnits = ScoredUnitsT<double>;

/// Both models must share one token list.
ScoredUnits score_units(const std::vector<Unit>& units, const OccurrenceModel& human_model,
                        const OccurrenceModel& ai_model);

inline constexpr double kFlatTolerance = 1e-12;

/// Mixture log-likelihood with per-unit terms rescaled by m_i = max(lp_i, lq_i):
///
///   log((1-alpha) e^lp + alpha e^lq) = m_i + log(a_i + alpha c_i),
///   a_i = e^(lp_i - m_i), c_i = e^(lq_i - m_i) - a_i.
///
/// One of a_i, a_i + c_i equals 1, so every interior term lies in
/// [min(alpha, 1 - alpha), 1]. Sums of logs are taken as logs of blocked
/// products sized so that the block product cannot underflow.
template <typename Scalar>
class MixtureLikelihood {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    MixtureLikelihood() = default;

    explicit MixtureLikelihood(const ScoredUnitsT<Scalar>& scored)
        : lp_(scored.lp), lq_(scored.lq), a_(scored.size()), c_(scored.size()) {
        if (!(lp_.isFinite().all() && lq_.isFinite().all())) throw Error("scored units must be finite");
        const Array m = lp_.max(lq_);
        a_ = (lp_ - m).exp();
        c_ = (lq_ - m).exp() - a_;
        sum_lp_ = lp_.sum();
        sum_lq_ = lq_.sum();
        sum_m_ = m.sum();
        flat_count_ = ((lp_ - lq_).abs() <= Scalar(kFlatTolerance)).count();
    }

    Eigen::Index size() const { return lp_.size(); }
    bool degenerate() const { return flat_count_ == size(); }

    Scalar operator()(Scalar alpha) const {
        if (alpha <= Scalar(0)) return sum_lp_;
        if (alpha >= Scalar(1)) return sum_lq_;
        return sum_m_ + sum_log_terms(alpha);
    }

    /// dL/dalpha on the open interval (0, 1).
    Scalar gradient(Scalar alpha) const {
        if (!(alpha > Scalar(0) && alpha < Scalar(1)))
            throw Error("gradient is defined only for 0 < alpha < 1");
        return (c_ / (a_ + alpha * c_)).sum();
    }

    /// d2L/dalpha2 on the open interval (0, 1); never positive.
    Scalar curvature(Scalar alpha) const {
        if (!(alpha > Scalar(0) && alpha < Scalar(1)))
            throw Error("curvature is defined only for 0 < alpha < 1");
        return -(c_ / (a_ + alpha * c_)).square().sum();
    }

    /// Likelihood of the multiset {units[indices[k]]}.
    MixtureLikelihood gather(std::span<const std::uint32_t> indices) const {
        MixtureLikelihood out;
        const auto n = static_cast<Eigen::Index>(indices.size());
        out.lp_.resize(n);
        out.lq_.resize(n);
        out.a_.resize(n);
        out.c_.resize(n);
        Scalar slp = 0, slq = 0, sm = 0;
        Eigen::Index flat = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]);
            const Scalar lp = lp_[i], lq = lq_[i];
            out.lp_[k] = lp;
            out.lq_[k] = lq;
            out.a_[k] = a_[i];
            out.c_[k] = c_[i];
            slp += lp;
            slq += lq;
            sm += std::max(lp, lq);
            flat += std::abs(lp - lq) <= Scalar(kFlatTolerance);
        }
        out.sum_lp_ = slp;
        out.sum_lq_ = slq;
        out.sum_m_ = sm;
        out.flat_count_ = flat;
        return out;
    }

private:
    Scalar sum_log_terms(Scalar alpha) const {
        constexpr int kLanes = 8;
        const Scalar floor = std::min(alpha, Scalar(1) - alpha);
        // floor^depth must stay above the smallest normal number.
        const Scalar limit = Scalar(0.9) * std::log(std::numeric_limits<Scalar>::min());
        const int depth = std::clamp(static_cast<int>(limit / std::log(floor)), 1, 64);

        const Scalar* a = a_.data();
        const Scalar* c = c_.data();
        const Eigen::Index n = a_.size();
        const Eigen::Index block = static_cast<Eigen::Index>(kLanes) * depth;
        Scalar total = 0;
        Eigen::Index i = 0;
        for (; i + block <= n; i += block) {
            Scalar acc[kLanes];
            for (int l = 0; l < kLanes; ++l) acc[l] = Scalar(1);
            for (int d = 0; d < depth; ++d) {
                const Eigen::Index base = i + static_cast<Eigen::Index>(d) * kLanes;
                for (int l = 0; l < kLanes; ++l) acc[l] *= a[base + l] + alpha * c[base + l];
            }
            for (int l = 0; l < kLanes; ++l) total += std::log(acc[l]);
        }
        for (; i < n; ++i) total += std::log(a[i] + alpha * c[i]);
        return total;
    }

    Array lp_, lq_, a_, c_;
    Scalar sum_lp_ = 0, sum_lq_ = 0, sum_m_ = 0;
    Eigen::Index flat_count_ = 0;
};

/// L(alpha); exactly sum(lp) at alpha = 0 and sum(lq) at alpha = 1.
template <typename Scalar>
Scalar log_likelihood(Scalar alpha, const ScoredUnitsT<Scalar>& scored) {
    if (alpha < Scalar(0) || alpha > Scalar(1)) throw Error("alpha must lie in [0, 1]");
    return MixtureLikelihood<Scalar>(scored)(alpha);
}

template <typename Scalar>
Scalar gradient(Scalar alpha, const ScoredUnitsT<Scalar>& scored) {
    return MixtureLikelihood<Scalar>(scored).gradient(alpha);
}

template <typename Scalar>
Scalar curvature(Scalar alpha, const ScoredUnitsT<Scalar>& scored) {
    return MixtureLikelihood<Scalar>(scored).curvature(alpha);
}

struct MixtureEstimate {
    double alpha = 0.0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::size_t n_units = 0;
    double loglik_at_alpha = 0.0;
    std::size_t bootstrap_iters = 0;
    std::uint64_t seed = 0;
    bool degenerate = false;
};

inline constexpr double kDefaultTolerance = 1e-6;
inline constexpr int kGridPoints = 101;

/// Golden-section search to bracket width <= tol, bracketed by the argmax of
/// a 101-point uniform grid. Flat likelihoods give alpha = 0 with the
/// degenerate flag set.
MixtureEstimate estimate_alpha(const ScoredUnits& scored, double tol = kDefaultTolerance);
MixtureEstimate estimate_alpha(const MixtureLikelihood<double>& likelihood, double tol = kDefaultTolerance);

struct BootstrapOptions {
    std::size_t iters = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    double tol = kDefaultTolerance;
};

/// Percentile bootstrap over units. Iteration i draws from its own substream
/// of (seed, i), so the result is independent of thread count.
MixtureEstimate bootstrap_ci(const ScoredUnits& scored, const BootstrapOptions& options = {});

/// Linear-interpolation percentile (Hyndman-Fan type 7) of sorted values.
double percentile_sorted(std::span<const double> sorted, double q);

/// {"alpha":…, "ci_low":…, "ci_high":…, "n_units":…, "bootstrap_iters":…, "seed":…, "degenerate":…}
std::string estimate_to_json(const MixtureEstimate& estimate);

}  // namespace llmfrac
