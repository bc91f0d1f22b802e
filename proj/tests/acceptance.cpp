// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "llmfrac/mle.hpp"
#include "llmfrac/occmodel.hpp"
#include "llmfrac/parallel.hpp"
#include "llmfrac/rng.hpp"
#include "llmfrac/theorysim.hpp"
#include "llmfrac/wordshift.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines _res.
#include <httplib.h>
#include <json.hpp>

using namespace llmfrac;
using fixtures::run;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ScoredUnits to_scored(const oracle::Instance& inst) {
    const auto n = static_cast<Eigen::Index>(inst.lp.size());
    return {Eigen::Map<const Eigen::ArrayXd>(inst.lp.data(), n), Eigen::Map<const Eigen::ArrayXd>(inst.lq.data(), n)};
}

// 200 tokens, p ~ U(0.01, 0.3), 40 tokens shifted by +0.2.
SyntheticGenerator validation_generator() { return SyntheticGenerator::shifted(200, 0.01, 0.3, 40, 0.2, 0.0, 2024); }

std::vector<oracle::Instance> random_instances(std::size_t count, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<oracle::Instance> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(oracle::random_instance(rng, n));
    return out;
}

Outcome synthetic_sweep() {
    testutil::TempDir dir;
    const auto gen = validation_generator();
    auto p = [&](const char* name) { return (dir / name).string(); };
    fixtures::write_pool(dir / "human_fit.jsonl", gen.with_alpha(0.0), 20000, 11, "hf");
    fixtures::write_pool(dir / "ai_fit.jsonl", gen.with_alpha(1.0), 20000, 12, "af");
    fixtures::write_pool(dir / "human_val.jsonl", gen.with_alpha(0.0), 20000, 13, "hv");
    fixtures::write_pool(dir / "ai_val.jsonl", gen.with_alpha(1.0), 20000, 14, "av");

    const auto t0 = Clock::now();
    const auto fit = run({"fit", "--human", p("human_fit.jsonl"), "--ai", p("ai_fit.jsonl"), "--unit", "document",
                          "--min-words", "1", "--out-human", p("human.model"), "--out-ai", p("ai.model")});
    if (fit.code != 0) return {false, "fit failed: " + fit.err};
    const auto val = run({"validate", "--human-model", p("human.model"), "--ai-model", p("ai.model"), "--human-val",
                          p("human_val.jsonl"), "--ai-val", p("ai_val.jsonl"), "--unit", "document", "--min-words",
                          "1", "--alphas", "0:0.25:0.025", "--n", "30000", "--bootstrap", "1000", "--seed", "1",
                          "--out", p("report.csv")});
    if (val.code != 0) return {false, "validate failed: " + val.err};
    const double secs = seconds_since(t0);

    std::istringstream csv(testutil::read_file(dir / "report.csv"));
    std::string line;
    std::getline(csv, line);
    double max_err = 0.0, sum = 0.0;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        double a_true, a_est, lo, hi, err;
        std::size_t n;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%zu", &a_true, &a_est, &lo, &hi, &err, &n) != 6)
            return {false, "unparseable row: " + line};
        max_err = std::max(max_err, err);
        sum += err;
        ++rows;
    }
    const double mean = rows ? sum / static_cast<double>(rows) : 1.0;
    return {rows == 11 && max_err <= 0.015 && mean <= 0.008,
            fmt("rows=%zu max_abs_error=%.6f (<= 0.015) mean_abs_error=%.6f (<= 0.008) time=%.1fs", rows, max_err, mean,
                secs)};
}

Outcome oracle_agreement(const std::vector<oracle::Instance>& instances) {
    double worst = 0.0, est_secs = 0.0;
    for (const auto& inst : instances) {
        const auto t0 = Clock::now();
        const double a = estimate_alpha(to_scored(inst)).alpha;
        est_secs += seconds_since(t0);
        worst = std::max(worst, std::abs(a - oracle::grid_argmax_direct(inst.lp, inst.lq, 10001)));
    }
    return {worst <= 1e-3 && est_secs < 10.0,
            fmt("instances=%zu max |alpha - grid argmax|=%.2e (<= 1e-3) estimator time=%.3fs (< 10s)",
                instances.size(), worst, est_secs)};
}

Outcome gradient_check(const std::vector<oracle::Instance>& instances) {
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t k = 0; k < 50; ++k) {
        const auto& inst = instances[k];
        const auto s = to_scored(inst);
        for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const double fd =
                (oracle::mixture_loglik(a + h, inst.lp, inst.lq) - oracle::mixture_loglik(a - h, inst.lp, inst.lq)) /
                (2 * h);
            const double g = gradient(a, s);
            worst = std::max(worst, std::abs(g - fd) / std::max(1.0, std::abs(fd)));
        }
    }
    return {worst <= 1e-6, fmt("instances=50 alphas=5 max relative error=%.2e (<= 1e-6)", worst)};
}

Outcome concavity(const std::vector<oracle::Instance>& instances) {
    double worst = -INFINITY;
    const double h = 1e-3;
    for (const auto& inst : instances) {
        const auto s = to_scored(inst);
        for (int k = 1; k <= 20; ++k) {
            const double a = k / 21.0;
            const double d2 = log_likelihood(a + h, s) - 2 * log_likelihood(a, s) + log_likelihood(a - h, s);
            worst = std::max(worst, d2);
        }
    }
    return {worst <= 1e-8, fmt("instances=%zu points=20 max second difference=%.3e (<= 1e-8)", instances.size(), worst)};
}

Outcome closed_form() {
    const auto vocab = std::make_shared<const Vocabulary>(std::vector<std::string>{"token"}, VocabMode::Full, 1);
    const OccurrenceModel human(vocab, Eigen::VectorXd::Constant(1, 0.2), 1, "human");
    const OccurrenceModel ai(vocab, Eigen::VectorXd::Constant(1, 0.8), 1, "ai");
    const std::size_t n = 1000;
    double worst = 0.0;
    std::string got;
    for (double f : {0.2, 0.32, 0.5, 0.8}) {
        std::vector<Unit> units(n);
        const auto hits = static_cast<std::size_t>(std::lround(f * n));
        for (std::size_t i = 0; i < hits; ++i) units[i].tokens = {"token"};
        const double alpha = estimate_alpha(score_units(units, human, ai)).alpha;
        const double expected = std::clamp((f - 0.2) / (0.8 - 0.2), 0.0, 1.0);
        worst = std::max(worst, std::abs(alpha - expected));
        got += fmt(" f=%.2f:%.6f", f, alpha);
    }
    return {worst <= 1e-4, "alpha_hat" + got + fmt(" max deviation=%.2e (<= 1e-4)", worst)};
}

Outcome bootstrap_coverage() {
    const auto gen = validation_generator().with_alpha(0.10);
    const std::size_t reps = 200;
    std::size_t covered = 0;
    double width = 0.0;
    const auto t0 = Clock::now();
    for (std::size_t r = 0; r < reps; ++r) {
        const auto scored = sample_scored(gen, 30000, derive_seed(606, r));
        const auto est = bootstrap_ci(scored, {.iters = 1000, .level = 0.95, .seed = derive_seed(607, r)});
        covered += (*est.ci_low <= 0.10 && 0.10 <= *est.ci_high);
        width += *est.ci_high - *est.ci_low;
    }
    const double rate = static_cast<double>(covered) / static_cast<double>(reps);
    return {rate >= 0.90, fmt("covered %zu/%zu = %.3f (>= 0.90) mean CI width=%.4f time=%.1fs", covered, reps, rate,
                              width / static_cast<double>(reps), seconds_since(t0))};
}

Outcome theorem_decay() {
    const auto gen = validation_generator().with_alpha(0.3);
    const auto report = error_scaling(gen, {2500, 10000, 40000}, 50, 77);
    bool decreasing = true;
    std::string errs;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (i > 0 && !(report.rows[i].mean_abs_error < report.rows[i - 1].mean_abs_error)) decreasing = false;
        errs += fmt(" n=%zu:%.6f", report.rows[i].n, report.rows[i].mean_abs_error);
    }
    return {decreasing && report.slope <= -0.15,
            "mean_abs_error" + errs + fmt(" strictly decreasing=%s slope=%.3f (<= -0.15)", decreasing ? "yes" : "no",
                                          report.slope)};
}

Outcome word_shift() {
    // Hand counts over 10 units per corpus; smoothed rates are (count + 0.5) / 11.
    const std::vector<std::pair<std::string, std::pair<int, int>>> counts = {
        {"delve", {0, 6}}, {"intricate", {1, 5}}, {"realm", {2, 2}},
        {"the", {9, 8}},   {"showcase", {0, 3}},  {"data", {5, 1}}};
    std::vector<Unit> human(10), ai(10);
    for (const auto& [token, c] : counts) {
        for (int i = 0; i < c.first; ++i) human[static_cast<std::size_t>(i)].tokens.push_back(token);
        for (int i = 0; i < c.second; ++i) ai[static_cast<std::size_t>(i)].tokens.push_back(token);
    }
    for (auto* corpus : {&human, &ai})
        for (auto& u : *corpus) std::sort(u.tokens.begin(), u.tokens.end());
    std::vector<std::string> tokens;
    for (const auto& [t, c] : counts) tokens.push_back(t);
    std::sort(tokens.begin(), tokens.end());
    const auto vocab = std::make_shared<const Vocabulary>(tokens, VocabMode::Full, 1);

    const std::string expected_table =
        "token,p,q,fold,log_odds\n"
        "delve,0.045455,0.590909,13.000000,3.412247\n"
        "showcase,0.045455,0.318182,7.000000,2.282382\n"
        "intricate,0.136364,0.500000,3.666667,1.845827\n"
        "realm,0.227273,0.227273,1.000000,0.000000\n"
        "the,0.863636,0.772727,0.894737,-0.622051\n"
        "data,0.500000,0.136364,0.272727,-1.845827\n";
    const auto table = shift_table_csv(shift_table(fit_model(human, vocab, "human"), fit_model(ai, vocab, "ai"), 10));
    const auto single = shift_table_csv({shift_row("delve", 0.01, 0.1)});
    const std::string expected_single = "token,p,q,fold,log_odds\ndelve,0.010000,0.100000,10.000000,2.397895\n";
    const bool ok_table = table == expected_table;
    const bool ok_single = single == expected_single;
    return {ok_table && ok_single, fmt("10-unit corpora table %s; p=0.01 q=0.1 row %s", ok_table ? "matches" : "DIFFERS",
                                       ok_single ? "matches (fold 10.000000, log_odds 2.397895)" : "DIFFERS")};
}

Outcome throughput() {
    const std::size_t vocab_size = 10000, n_units = 100000;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0005, 0.005);
    std::vector<std::string> tokens(vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) tokens[i] = fmt("tok%05zu", i);
    const auto vocab = std::make_shared<const Vocabulary>(tokens, VocabMode::Full, 1);
    Eigen::VectorXd p(static_cast<Eigen::Index>(vocab_size)), q(static_cast<Eigen::Index>(vocab_size));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p[i] = u(rng);
        q[i] = i % 5 == 0 ? p[i] + 0.003 : p[i];
    }
    const OccurrenceModel human(vocab, p, 1, "human"), ai(vocab, q, 1, "ai");
    std::vector<Unit> units(n_units);
    for (auto& unit : units) {
        const std::size_t k = 5 + rng() % 36;
        for (std::size_t j = 0; j < k; ++j) unit.tokens.push_back(tokens[rng() % vocab_size]);
        std::sort(unit.tokens.begin(), unit.tokens.end());
        unit.tokens.erase(std::unique(unit.tokens.begin(), unit.tokens.end()), unit.tokens.end());
        unit.token_count = unit.tokens.size();
    }

    const auto saved = parallel_threads();
    parallel_threads() = 1;
    const auto t0 = Clock::now();
    const auto scored = score_units(units, human, ai);
    const auto est = estimate_alpha(scored);
    const double secs = seconds_since(t0);
    parallel_threads() = saved;

    // Sparse scoring agrees with the dense product on small random models.
    double worst = 0.0;
    std::uniform_real_distribution<double> up(0.001, 0.999);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 50;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back(fmt("v%03zu", i));
        const auto v = std::make_shared<const Vocabulary>(names, VocabMode::Full, 1);
        Eigen::VectorXd probs(static_cast<Eigen::Index>(n));
        std::vector<double> pv(n);
        std::vector<bool> present(n);
        Unit unit;
        for (std::size_t t = 0; t < n; ++t) {
            pv[t] = probs[static_cast<Eigen::Index>(t)] = up(rng);
            present[t] = rng() % 2;
            if (present[t]) unit.tokens.push_back(names[t]);
        }
        const OccurrenceModel m(v, probs, 1, "m");
        worst = std::max(worst, std::abs(unit_log_likelihood(m, unit) - oracle::dense_unit_loglik(pv, present)));
    }
    return {secs <= 5.0 && worst <= 1e-9,
            fmt("score+MLE on %zu units x %zu tokens single-threaded: %.3fs (<= 5s), alpha=%.4f; "
                "sparse vs dense max diff=%.1e (<= 1e-9)",
                n_units, vocab_size, secs, est.alpha, worst)};
}

Outcome determinism() {
    testutil::TempDir dir;
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    const auto gen = SyntheticGenerator::shifted(40, 0.05, 0.3, 12, 0.25, 0.0, 5);
    fixtures::write_pool(dir / "human.jsonl", gen.with_alpha(0.0), 800, 1, "h");
    fixtures::write_pool(dir / "ai.jsonl", gen.with_alpha(1.0), 800, 2, "a");
    auto dated = units_to_documents(sample_units(gen.with_alpha(0.2), 600, 3), "t");
    for (std::size_t i = 0; i < dated.size(); ++i) {
        dated[i].date = Date{std::chrono::year{2023}, std::chrono::month{static_cast<unsigned>(1 + i % 7)},
                             std::chrono::day{static_cast<unsigned>(1 + i % 28)}};
        dated[i].group = i % 3 ? "urban" : "rural";
    }
    write_jsonl(dir / "dated.jsonl", dated);
    std::vector<RawDocument> to_rewrite(dated.begin(), dated.begin() + 6);
    write_jsonl(dir / "rewrite.jsonl", to_rewrite);

    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        const auto prompt = body["messages"][0]["content"].get<std::string>();
        nlohmann::json out;
        out["choices"][0]["message"]["content"] = "rewritten " + std::to_string(prompt.size()) + ": " +
                                                  prompt.substr(prompt.size() > 40 ? prompt.size() - 40 : 0);
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";

    const std::vector<std::string> models = {"--human-model", p("run1/h.model"), "--ai-model", p("run1/a.model"),
                                             "--unit", "document", "--min-words", "1"};
    auto with_models = [&](std::vector<std::string> args) {
        args.insert(args.end(), models.begin(), models.end());
        return args;
    };
    // Each entry: subcommand name, argument builder for run k, primary outputs of run k.
    struct Command {
        std::string name;
        std::function<std::vector<std::string>(const std::string&)> args;
        std::vector<std::string> outputs;
    };
    const std::vector<Command> commands = {
        {"fit",
         [&](const std::string& r) {
             return std::vector<std::string>{"fit", "--human", p("human.jsonl"), "--ai", p("ai.jsonl"), "--unit",
                                             "document", "--min-words", "1", "--seed", "9", "--out-human",
                                             p(r + "/h.model"), "--out-ai", p(r + "/a.model")};
         },
         {"h.model", "a.model"}},
        {"estimate",
         [&](const std::string& r) {
             return with_models({"estimate", "--target", p("dated.jsonl"), "--bootstrap", "200", "--seed", "9", "--out",
                                 p(r + "/est.json")});
         },
         {"est.json"}},
        {"validate",
         [&](const std::string& r) {
             return with_models({"validate", "--human-val", p("human.jsonl"), "--ai-val", p("ai.jsonl"), "--alphas",
                                 "0:0.2:0.05", "--n", "2000", "--bootstrap", "100", "--seed", "9", "--out",
                                 p(r + "/val.csv")});
         },
         {"val.csv"}},
        {"trend",
         [&](const std::string& r) {
             return with_models({"trend", "--target", p("dated.jsonl"), "--bin", "quarter", "--cap", "50",
                                 "--group-key", "group", "--bootstrap", "100", "--seed", "9", "--out",
                                 p(r + "/trend.csv")});
         },
         {"trend.csv"}},
        {"wordshift",
         [&](const std::string& r) {
             return with_models({"wordshift", "--top", "20", "--target", p("dated.jsonl"), "--token", "w0003",
                                 "--series-out", p(r + "/series.csv"), "--seed", "9", "--out", p(r + "/shift.csv")});
         },
         {"shift.csv", "series.csv"}},
        {"simulate-theory",
         [&](const std::string& r) {
             return std::vector<std::string>{"simulate-theory", "--vocab-size", "60", "--ns", "300,1200", "--reps",
                                             "10", "--seed", "9", "--out", p(r + "/sim.csv")};
         },
         {"sim.csv"}},
        {"gen-ai",
         [&](const std::string& r) {
             return std::vector<std::string>{"gen-ai", "--human", p("rewrite.jsonl"), "--endpoint", endpoint,
                                             "--cache-dir", p(r + "/cache"), "--seed", "9", "--out",
                                             p(r + "/gen.jsonl")};
         },
         {"gen.jsonl"}},
    };

    std::string summary;
    bool all_ok = true;
    for (const auto& cmd : commands) {
        bool ok = true;
        for (const std::string r : {"run1", "run2"}) {
            const auto res = run(cmd.args(r));
            if (res.code != 0) {
                ok = false;
                summary += " " + cmd.name + "(exit " + std::to_string(res.code) + ": " + res.err + ")";
            }
        }
        for (const auto& out : cmd.outputs) {
            const auto a = testutil::read_file(dir / "run1" / out);
            const auto b = testutil::read_file(dir / "run2" / out);
            if (a.empty() || a != b) ok = false;
        }
        summary += " " + cmd.name + "=" + (ok ? "identical" : "DIFFERS");
        all_ok = all_ok && ok;
    }
    server.stop();
    listener.join();
    return {all_ok, "subcommands:" + summary};
}

}  // namespace

int main() {
    const auto instances = random_instances(100, 1000, 20240501);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"synthetic validation sweep", synthetic_sweep},
        {"MLE vs 10,001-point grid oracle", [&] { return oracle_agreement(instances); }},
        {"gradient vs central finite difference", [&] { return gradient_check(instances); }},
        {"concavity", [&] { return concavity(instances); }},
        {"closed-form single-token case", closed_form},
        {"bootstrap coverage", bootstrap_coverage},
        {"error decay with n", theorem_decay},
        {"word shift arithmetic", word_shift},
        {"throughput", throughput},
        {"CLI determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[criterion %zu] %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
