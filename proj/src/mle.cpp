#include "llmfrac/mle.hpp"

#include <array>

#include <json.hpp>

#include "llmfrac/parallel.hpp"
#include "llmfrac/rng.hpp"

namespace llmfrac {

ScoredUnits score_units(const std::vector<Unit>& units, const OccurrenceModel& human_model,
                        const OccurrenceModel& ai_model) {
    if (human_model.vocab_ptr() != ai_model.vocab_ptr() && !human_model.vocab().same_tokens(ai_model.vocab()))
        throw Error("human and AI models use different vocabularies");
    const auto& vocab = human_model.vocab();
    const auto& wp = human_model.presence_weights();
    const auto& wq = ai_model.presence_weights();
    ScoredUnits out;
    out.lp.resize(static_cast<Eigen::Index>(units.size()));
    out.lq.resize(static_cast<Eigen::Index>(units.size()));
    parallel_for(units.size(), [&](std::size_t k) {
        double lp = human_model.base_log_mass();
        double lq = ai_model.base_log_mass();
        for (const auto& t : units[k].tokens) {
            if (auto i = vocab.index_of(t)) {
                lp += wp[static_cast<Eigen::Index>(*i)];
                lq += wq[static_cast<Eigen::Index>(*i)];
            }
        }
        out.lp[static_cast<Eigen::Index>(k)] = lp;
        out.lq[static_cast<Eigen::Index>(k)] = lq;
    });
    return out;
}

MixtureEstimate estimate_alpha(const MixtureLikelihood<double>& L, double tol) {
    if (L.size() == 0) throw Error("cannot estimate alpha from zero units");
    if (!(tol > 0.0)) throw Error("tolerance must be positive");
    MixtureEstimate est;
    est.n_units = static_cast<std::size_t>(L.size());
    if (L.degenerate()) {
        est.alpha = 0.0;
        est.degenerate = true;
        est.loglik_at_alpha = L(0.0);
        return est;
    }

    // Grid argmax. L is concave, so the forward difference L(g[k+1]) - L(g[k])
    // changes sign once; bisecting on that sign finds the first maximiser of
    // the full 101-point scan with O(log) evaluations.
    constexpr int last = kGridPoints - 1;
    std::array<double, kGridPoints> cache;
    std::array<bool, kGridPoints> known{};
    auto grid = [&](int k) {
        if (!known[static_cast<std::size_t>(k)]) {
            cache[static_cast<std::size_t>(k)] = L(static_cast<double>(k) / last);
            known[static_cast<std::size_t>(k)] = true;
        }
        return cache[static_cast<std::size_t>(k)];
    };
    int lo = 0, hi = last;  // first k in [lo, hi] with grid(k) >= grid(k+1), or last
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (grid(mid) >= grid(mid + 1))
            hi = mid;
        else
            lo = mid + 1;
    }
    const int k = lo;

    double a = static_cast<double>(std::max(k - 1, 0)) / last;
    double b = static_cast<double>(std::min(k + 1, last)) / last;
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = L(x1), f2 = L(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = L(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = L(x1);
        }
    }
    double alpha = std::clamp(0.5 * (a + b), 0.0, 1.0);
    double best = L(alpha);
    // The maximum may sit exactly on a boundary; golden section only samples interior points.
    if (k == 0 && L(0.0) >= best) {
        alpha = 0.0;
        best = L(0.0);
    }
    if (k == last && L(1.0) >= best) {
        alpha = 1.0;
        best = L(1.0);
    }
    est.alpha = alpha;
    est.loglik_at_alpha = best;
    return est;
}

MixtureEstimate estimate_alpha(const ScoredUnits& scored, double tol) {
    if (scored.empty()) throw Error("cannot estimate alpha from zero units");
    return estimate_alpha(MixtureLikelihood<double>(scored), tol);
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error("percentile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

MixtureEstimate bootstrap_ci(const ScoredUnits& scored, const BootstrapOptions& options) {
    if (options.iters < 2) throw Error("bootstrap needs at least 2 iterations");
    if (!(options.level > 0.0 && options.level < 1.0)) throw Error("confidence level must lie in (0, 1)");
    if (scored.empty()) throw Error("cannot estimate alpha from zero units");
    if (scored.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("too many units for bootstrap");

    const MixtureLikelihood<double> L(scored);
    MixtureEstimate est = estimate_alpha(L, options.tol);
    const auto n = static_cast<std::uint64_t>(scored.size());

    std::vector<double> alphas(options.iters);
    parallel_for(options.iters, [&](std::size_t it) {
        Rng rng = substream(options.seed, it);
        std::vector<std::uint32_t> idx(n);
        for (auto& i : idx) i = static_cast<std::uint32_t>(uniform_index(rng, n));
        alphas[it] = estimate_alpha(L.gather(idx), options.tol).alpha;
    });
    std::sort(alphas.begin(), alphas.end());

    const double tail = (1.0 - options.level) / 2.0;
    // Percentile bounds are widened to contain the point estimate when the
    // bootstrap distribution is skewed away from it (boundary estimates).
    est.ci_low = std::min(percentile_sorted(alphas, tail), est.alpha);
    est.ci_high = std::max(percentile_sorted(alphas, 1.0 - tail), est.alpha);
    est.bootstrap_iters = options.iters;
    est.seed = options.seed;
    return est;
}

std::string estimate_to_json(const MixtureEstimate& e) {
    nlohmann::ordered_json j;
    j["alpha"] = e.alpha;
    j["ci_low"] = e.ci_low ? nlohmann::ordered_json(*e.ci_low) : nlohmann::ordered_json(nullptr);
    j["ci_high"] = e.ci_high ? nlohmann::ordered_json(*e.ci_high) : nlohmann::ordered_json(nullptr);
    j["n_units"] = e.n_units;
    j["bootstrap_iters"] = e.bootstrap_iters;
    j["seed"] = e.seed;
    j["degenerate"] = e.degenerate;
    j["loglik_at_alpha"] = e.loglik_at_alpha;
    return j.dump() + "\n";
}

}  // namespace llmfrac
