#include "llmfrac/trend.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "llmfrac/error.hpp"
#include "llmfrac/mle.hpp"
#include "llmfrac/rng.hpp"

namespace llmfrac {

std::string TrendSeries::to_csv() const {
    std::string out = "bin,group,alpha,ci_low,ci_high,n_sampled,n_available\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%zu,%zu\n", r.alpha, r.ci_low, r.ci_high, r.n_sampled,
                      r.n_available);
        out += r.bin + ',' + r.group + buf;
    }
    return out;
}

TrendSeries estimate_trend(const std::vector<RawDocument>& docs, const OccurrenceModel& human_model,
                           const OccurrenceModel& ai_model, const TrendOptions& options) {
    if (!human_model.vocab().same_tokens(ai_model.vocab()))
        throw Error("human and AI models use different vocabularies");
    if (options.cap < 1) throw Error("per-bin cap must be at least 1");

    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto& d = docs[i];
        if (!d.date) throw Error("document '" + d.id + "' has no date");
        std::string group = "all";
        if (options.stratify_by_group) group = d.group ? *d.group : "none";
        buckets[{group, bin_label(*d.date, options.bin)}].push_back(i);
    }

    TrendSeries series;
    series.bin_kind = options.bin;
    series.cap = options.cap;
    series.seed = options.seed;
    for (auto& [key, members] : buckets) {
        const auto& [group, bin] = key;
        const std::uint64_t bucket_seed = derive_seed(options.seed, fnv1a64(group + '\x1f' + bin));
        Rng rng = substream(bucket_seed, 1);
        const std::size_t take = std::min(options.cap, members.size());
        for (std::size_t i = 0; i < take; ++i)
            std::swap(members[i], members[i + uniform_index(rng, members.size() - i)]);
        std::vector<std::size_t> chosen(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(chosen.begin(), chosen.end());

        std::vector<RawDocument> sampled;
        sampled.reserve(take);
        for (auto i : chosen) sampled.push_back(docs[i]);
        const auto units = to_units(sampled, options.unit_kind, options.min_words);
        if (units.empty()) {
            series.warnings.push_back("bin " + bin + " group " + group + ": no qualifying units, row omitted");
            continue;
        }
        BootstrapOptions boot;
        boot.iters = options.iters;
        boot.level = options.level;
        boot.seed = derive_seed(bucket_seed, 2);
        const auto est = bootstrap_ci(score_units(units, human_model, ai_model), boot);
        series.rows.push_back({bin, group, est.alpha, *est.ci_low, *est.ci_high, take, members.size(), units.size()});
    }
    return series;
}

}  // namespace llmfrac
