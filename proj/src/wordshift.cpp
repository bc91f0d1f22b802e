#include "llmfrac/wordshift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "llmfrac/error.hpp"

namespace llmfrac {

namespace {

double log_odds_of(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

ShiftRow shift_row(std::string token, double p, double q) {
    if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)) throw Error("shift probabilities must lie in (0, 1)");
    return {std::move(token), p, q, q / p, log_odds_of(q) - log_odds_of(p)};
}

std::vector<ShiftRow> shift_table(const OccurrenceModel& human_model, const OccurrenceModel& ai_model,
                                  std::size_t top_k) {
    if (!human_model.vocab().same_tokens(ai_model.vocab()))
        throw Error("human and AI models use different vocabularies");
    const auto& tokens = human_model.vocab().tokens();
    std::vector<ShiftRow> rows;
    rows.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        rows.push_back(shift_row(tokens[i], human_model.probs()[k], ai_model.probs()[k]));
    }
    const auto keep = std::min(top_k, rows.size());
    auto by_shift = [](const ShiftRow& a, const ShiftRow& b) {
        if (a.log_odds != b.log_odds) return a.log_odds > b.log_odds;
        return a.token < b.token;
    };
    std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(keep), rows.end(), by_shift);
    rows.resize(keep);
    return rows;
}

std::string shift_table_csv(const std::vector<ShiftRow>& rows) {
    std::string out = "token,p,q,fold,log_odds\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.p, r.q, r.fold, r.log_odds);
        out += r.token;
        out += buf;
    }
    return out;
}

BinKind parse_bin_kind(std::string_view s) {
    if (s == "month") return BinKind::Month;
    if (s == "quarter") return BinKind::Quarter;
    if (s == "year") return BinKind::Year;
    throw UsageError("unknown bin kind '" + std::string(s) + "' (expected month|quarter|year)");
}

std::string_view to_string(BinKind kind) {
    switch (kind) {
        case BinKind::Month: return "month";
        case BinKind::Quarter: return "quarter";
        case BinKind::Year: return "year";
    }
    return "month";
}

std::string bin_label(const Date& date, BinKind kind) {
    const int y = static_cast<int>(date.year());
    const unsigned m = static_cast<unsigned>(date.month());
    char buf[48];
    switch (kind) {
        case BinKind::Month: std::snprintf(buf, sizeof buf, "%04d-%02u", y, m); break;
        case BinKind::Quarter: std::snprintf(buf, sizeof buf, "%04dQ%u", y, (m - 1) / 3 + 1); break;
        case BinKind::Year: std::snprintf(buf, sizeof buf, "%04d", y); break;
    }
    return buf;
}

std::vector<DatedUnit> dated_units(const std::vector<RawDocument>& docs, UnitKind kind, std::size_t min_words) {
    std::vector<DatedUnit> out;
    for (const auto& doc : docs) {
        if (!doc.date) throw Error("document '" + doc.id + "' has no date");
        for (auto& u : to_units({doc}, kind, min_words)) out.push_back({*doc.date, std::move(u)});
    }
    return out;
}

std::vector<std::pair<std::string, double>> frequency_series(const std::vector<DatedUnit>& units,
                                                             std::string_view token, BinKind kind) {
    const std::string folded = fold_token(token);
    std::map<std::string, std::pair<std::size_t, std::size_t>> bins;  // label -> (hits, total)
    for (const auto& du : units) {
        if (!du.date.ok()) throw Error("unit from '" + du.unit.doc_id + "' has no valid date");
        auto& [hits, total] = bins[bin_label(du.date, kind)];
        ++total;
        hits += du.unit.contains(folded);
    }
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [label, counts] : bins)
        out.emplace_back(label, static_cast<double>(counts.first) / static_cast<double>(counts.second));
    return out;
}

std::string frequency_series_csv(const std::vector<std::pair<std::string, double>>& series) {
    std::string out = "bin,rate\n";
    char buf[64];
    for (const auto& [label, rate] : series) {
        std::snprintf(buf, sizeof buf, ",%.6f\n", rate);
        out += label;
        out += buf;
    }
    return out;
}

}  // namespace llmfrac
