#include "llmfrac/validate.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "llmfrac/error.hpp"
#include "llmfrac/rng.hpp"

namespace llmfrac {

namespace {

double parse_double(std::string_view s) {
    std::string str(s);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(str, &used);
    } catch (const std::exception&) {
        throw UsageError("not a number: '" + str + "'");
    }
    if (used != str.size()) throw UsageError("not a number: '" + str + "'");
    return v;
}

double clean(double x) { return std::round(x * 1e12) / 1e12; }

}  // namespace

double ValidationReport::max_abs_error() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.abs_error);
    return m;
}

double ValidationReport::mean_abs_error() const {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += r.abs_error;
    return s / static_cast<double>(rows.size());
}

std::string ValidationReport::to_csv() const {
    std::string out = "alpha_true,alpha_est,ci_low,ci_high,abs_error,n\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%zu\n", r.alpha_true, r.alpha_est, r.ci_low,
                      r.ci_high, r.abs_error, r.n);
        out += buf;
    }
    return out;
}

std::size_t ai_share(double alpha, std::size_t n) {
    // Snap away representation noise (0.35 * 10 = 3.4999999999999996) before rounding half to even.
    const double x = std::round(alpha * static_cast<double>(n) * 1e9) / 1e9;
    const int saved = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double k = std::nearbyint(x);
    std::fesetround(saved);
    return static_cast<std::size_t>(k);
}

std::vector<Unit> make_mixture(const std::vector<Unit>& human_units, const std::vector<Unit>& ai_units,
                               double alpha_true, std::size_t n, std::uint64_t seed) {
    if (!(alpha_true >= 0.0 && alpha_true <= 1.0)) throw Error("alpha must lie in [0, 1]");
    if (n < 1) throw Error("mixture size must be at least 1");
    const std::size_t k = ai_share(alpha_true, n);
    if (k > 0 && ai_units.empty()) throw Error("AI pool is empty but the mixture needs AI units");
    if (k < n && human_units.empty()) throw Error("human pool is empty but the mixture needs human units");

    Rng rng = substream(seed, 0x6d6978ULL);
    std::vector<Unit> out;
    out.reserve(n);
    for (std::size_t i = 0; i < k; ++i) out.push_back(ai_units[uniform_index(rng, ai_units.size())]);
    for (std::size_t i = k; i < n; ++i) out.push_back(human_units[uniform_index(rng, human_units.size())]);
    shuffle(out.begin(), out.end(), rng);
    return out;
}

std::vector<double> parse_alpha_grid(std::string_view spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string_view::npos) {
        const auto c1 = spec.find(':');
        const auto c2 = spec.find(':', c1 + 1);
        if (c2 == std::string_view::npos) throw UsageError("alpha grid must be start:stop:step");
        const double start = parse_double(spec.substr(0, c1));
        const double stop = parse_double(spec.substr(c1 + 1, c2 - c1 - 1));
        const double step = parse_double(spec.substr(c2 + 1));
        if (!(step > 0.0) || stop < start) throw UsageError("alpha grid needs step > 0 and stop >= start");
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) out.push_back(clean(start + static_cast<double>(i) * step));
    } else {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            auto comma = spec.find(',', pos);
            if (comma == std::string_view::npos) comma = spec.size();
            out.push_back(parse_double(spec.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    for (double a : out)
        if (!(a >= 0.0 && a <= 1.0)) throw UsageError("alpha values must lie in [0, 1]");
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> default_alpha_grid() { return parse_alpha_grid("0:0.25:0.025"); }

ValidationReport sweep(const std::vector<Unit>& human_val, const std::vector<Unit>& ai_val,
                       const OccurrenceModel& human_model, const OccurrenceModel& ai_model,
                       const SweepOptions& options) {
    ValidationReport report;
    report.seed = options.seed;
    {
        std::ostringstream cfg;
        cfg << "n=" << options.n << " iters=" << options.iters << " level=" << options.level
            << " human_pool=" << human_val.size() << " ai_pool=" << ai_val.size()
            << " human_model_units=" << human_model.n_units() << " ai_model_units=" << ai_model.n_units();
        report.config = cfg.str();
    }
    std::vector<double> alphas = options.alphas;
    std::sort(alphas.begin(), alphas.end());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double alpha = alphas[i];
        const auto mixture = make_mixture(human_val, ai_val, alpha, options.n, derive_seed(options.seed, 1, i));
        const auto scored = score_units(mixture, human_model, ai_model);
        BootstrapOptions boot;
        boot.iters = options.iters;
        boot.level = options.level;
        boot.seed = derive_seed(options.seed, 2, i);
        const auto est = bootstrap_ci(scored, boot);
        report.rows.push_back(
            {alpha, est.alpha, *est.ci_low, *est.ci_high, std::abs(est.alpha - alpha), mixture.size()});
    }
    return report;
}

}  // namespace llmfrac
