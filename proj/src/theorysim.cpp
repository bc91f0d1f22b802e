#include "llmfrac/theorysim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "llmfrac/error.hpp"
#include "llmfrac/parallel.hpp"
#include "llmfrac/rng.hpp"

namespace llmfrac {

namespace {

std::shared_ptr<const Vocabulary> synthetic_vocabulary(std::size_t size) {
    int width = 4;
    for (std::size_t v = size; v >= 10000; v /= 10) ++width;
    std::vector<std::string> tokens(size);
    char buf[64];
    for (std::size_t i = 0; i < size; ++i) {
        std::snprintf(buf, sizeof buf, "w%0*zu", std::min(width, 20), i);
        tokens[i] = buf;
    }
    return std::make_shared<const Vocabulary>(std::move(tokens), VocabMode::Full, 0);
}

// Draws n units and hands each one's (is_ai, present token indices) to visit.
template <typename Visit>
void draw_units(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed, Visit&& visit) {
    Rng rng = substream(seed, 0x73796eULL);
    const auto v = static_cast<Eigen::Index>(gen.vocab_size());
    std::vector<std::size_t> present;
    present.reserve(gen.vocab_size());
    for (std::size_t i = 0; i < n; ++i) {
        const bool is_ai = uniform01(rng) < gen.alpha_true();
        const Eigen::VectorXd& probs = is_ai ? gen.q() : gen.p();
        present.clear();
        for (Eigen::Index t = 0; t < v; ++t)
            if (uniform01(rng) < probs[t]) present.push_back(static_cast<std::size_t>(t));
        visit(i, is_ai, present);
    }
}

ScoredUnits draw_scored(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed,
                        const OccurrenceModel& human, const OccurrenceModel& ai) {
    ScoredUnits out;
    out.lp.resize(static_cast<Eigen::Index>(n));
    out.lq.resize(static_cast<Eigen::Index>(n));
    draw_units(gen, n, seed, [&](std::size_t i, bool, const std::vector<std::size_t>& present) {
        out.lp[static_cast<Eigen::Index>(i)] = human.log_likelihood(present);
        out.lq[static_cast<Eigen::Index>(i)] = ai.log_likelihood(present);
    });
    return out;
}

}  // namespace

SyntheticGenerator::SyntheticGenerator(Eigen::VectorXd p, Eigen::VectorXd q, double alpha_true)
    : p_(std::move(p)), q_(std::move(q)), alpha_true_(alpha_true) {
    if (p_.size() == 0 || p_.size() != q_.size()) throw Error("generator needs equal-length, non-empty p and q");
    auto interior = [](const Eigen::VectorXd& v) { return (v.array() > 0.0).all() && (v.array() < 1.0).all(); };
    if (!interior(p_) || !interior(q_)) throw Error("generator probabilities must lie strictly inside (0, 1)");
    if (p_ == q_) throw Error("generator p and q must differ in at least one token");
    if (!(alpha_true_ >= 0.0 && alpha_true_ <= 1.0)) throw Error("alpha must lie in [0, 1]");
    vocab_ = synthetic_vocabulary(static_cast<std::size_t>(p_.size()));
}

SyntheticGenerator SyntheticGenerator::shifted(std::size_t vocab_size, double p_low, double p_high,
                                               std::size_t n_shifted, double shift, double alpha_true,
                                               std::uint64_t seed) {
    if (n_shifted > vocab_size) throw Error("cannot shift more tokens than the vocabulary holds");
    Rng rng = substream(seed, 0x676e7ULL);
    Eigen::VectorXd p(static_cast<Eigen::Index>(vocab_size));
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = p_low + (p_high - p_low) * uniform01(rng);
    std::vector<std::size_t> order(vocab_size);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);
    Eigen::VectorXd q = p;
    for (std::size_t k = 0; k < n_shifted; ++k) q[static_cast<Eigen::Index>(order[k])] += shift;
    return {std::move(p), std::move(q), alpha_true};
}

std::vector<Unit> sample_units(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed) {
    std::vector<Unit> out(n);
    const auto& names = gen.vocabulary()->tokens();
    draw_units(gen, n, seed, [&](std::size_t i, bool, const std::vector<std::size_t>& present) {
        Unit& u = out[i];
        u.doc_id = "syn-" + std::to_string(i);
        u.tokens.reserve(present.size());
        for (auto t : present) u.tokens.push_back(names[t]);
        u.token_count = u.tokens.size();
    });
    return out;
}

ScoredUnits sample_scored(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed) {
    return draw_scored(gen, n, seed, gen.human_model(), gen.ai_model());
}

std::vector<RawDocument> units_to_documents(const std::vector<Unit>& units, const std::string& id_prefix) {
    std::vector<RawDocument> docs;
    docs.reserve(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        RawDocument d;
        d.id = id_prefix + std::to_string(i);
        for (const auto& t : units[i].tokens) {
            if (!d.text.empty()) d.text += ' ';
            d.text += t;
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

GeneratorConstants measure_constants(const SyntheticGenerator& gen, std::size_t n, std::uint64_t seed) {
    const auto scored = sample_scored(gen, n, seed);
    GeneratorConstants c;
    c.sample_size = n;
    c.log_kappa_hat = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < scored.size(); ++i) {
        const double lp = scored.lp[i], lq = scored.lq[i];
        c.c_hat = std::max({c.c_hat, std::abs(lp), std::abs(lq)});
        // |P - Q| / max(P, Q)^2 in log space.
        const double top = std::max(lp, lq);
        const double log_gap = top + std::log(-std::expm1(-std::abs(lp - lq)));
        c.log_kappa_hat = std::min(c.log_kappa_hat, log_gap - 2.0 * top);
    }
    c.kappa_hat = std::exp(c.log_kappa_hat);
    return c;
}

std::string ScalingReport::to_csv() const {
    nlohmann::ordered_json header;
    header["slope"] = slope;
    header["kappa_hat"] = constants.kappa_hat;
    header["log_kappa_hat"] = constants.log_kappa_hat;
    header["c_hat"] = constants.c_hat;
    header["delta"] = delta;
    header["calibration_units"] = constants.sample_size;
    header["models"] = refit ? "refit" : "true";
    if (refit) header["reference_units"] = reference_units;
    std::string out = header.dump() + "\nn,mean_abs_error,reps\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.9f,%zu\n", r.n, r.mean_abs_error, r.repetitions);
        out += buf;
    }
    return out;
}

ScalingReport error_scaling(const SyntheticGenerator& gen, const std::vector<std::size_t>& ns, std::size_t reps,
                            std::uint64_t seed, const ScalingOptions& options) {
    if (ns.empty()) throw Error("error_scaling needs at least one sample size");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 1) throw Error("sample sizes must be positive");
        if (i > 0 && ns[i] <= ns[i - 1]) throw Error("sample sizes must be strictly increasing");
    }
    if (reps < 10) throw Error("error_scaling needs at least 10 repetitions");

    ScalingReport report;
    report.delta = options.delta;
    report.refit = options.refit;
    report.constants = measure_constants(gen, options.calibration_units, derive_seed(seed, 4));

    OccurrenceModel human = gen.human_model();
    OccurrenceModel ai = gen.ai_model();
    if (options.refit) {
        report.reference_units = options.reference_units;
        const auto vocab = gen.vocabulary();
        human = fit_model(sample_units(gen.with_alpha(0.0), options.reference_units, derive_seed(seed, 5)), vocab,
                          "human");
        ai = fit_model(sample_units(gen.with_alpha(1.0), options.reference_units, derive_seed(seed, 6)), vocab, "ai");
    }

    for (std::size_t j = 0; j < ns.size(); ++j) {
        std::vector<double> errors(reps);
        parallel_for(reps, [&](std::size_t r) {
            const auto scored = draw_scored(gen, ns[j], derive_seed(seed, 3, j, r), human, ai);
            errors[r] = std::abs(estimate_alpha(scored).alpha - gen.alpha_true());
        });
        double sum = 0.0;
        for (double e : errors) sum += e;
        report.rows.push_back({ns[j], sum / static_cast<double>(reps), reps});
    }

    // Least-squares slope over rows with a positive mean error.
    std::vector<double> xs, ys;
    for (const auto& r : report.rows) {
        if (r.mean_abs_error > 0.0) {
            xs.push_back(std::log(static_cast<double>(r.n)));
            ys.push_back(std::log(r.mean_abs_error));
        }
    }
    if (xs.size() >= 2) {
        const Eigen::Map<const Eigen::ArrayXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
        const Eigen::Map<const Eigen::ArrayXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
        const Eigen::ArrayXd dx = x - x.mean();
        report.slope = (dx * (y - y.mean())).sum() / dx.square().sum();
    } else {
        report.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

}  // namespace llmfrac
