#include "llmfrac/cli.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "llmfrac/corpus.hpp"
#include "llmfrac/digest.hpp"
#include "llmfrac/error.hpp"
#include "llmfrac/genclient.hpp"
#include "llmfrac/mle.hpp"
#include "llmfrac/occmodel.hpp"
#include "llmfrac/theorysim.hpp"
#include "llmfrac/trend.hpp"
#include "llmfrac/validate.hpp"
#include "llmfrac/vocab.hpp"
#include "llmfrac/wordshift.hpp"

namespace llmfrac {

namespace {

using ordered_json = nlohmann::ordered_json;

void make_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    make_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        const auto item = s.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("not a count: '" + item + "'");
        }
        pos = comma + 1;
    }
    return out;
}

/// Resolved parameters, input digests and timing written next to each output.
class Manifest {
public:
    Manifest(std::string subcommand, const CLI::App& sub) : subcommand_(std::move(subcommand)) {
        for (const auto* opt : sub.get_options()) {
            const auto& name = opt->get_single_name();
            if (name.empty() || name == "help") continue;
            if (opt->get_type_size() == 0) {
                params_[name] = opt->count() > 0;
            } else if (opt->count() > 0) {
                const auto& results = opt->results();
                params_[name] = results.size() == 1 ? ordered_json(results.front()) : ordered_json(results);
            } else {
                params_[name] = opt->get_default_str();
            }
        }
    }

    void input(const std::string& path) {
        if (!path.empty()) inputs_[path] = sha256_file(path);
    }
    void note(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

    void write(const std::filesystem::path& output, std::uint64_t seed) const {
        ordered_json j;
        j["subcommand"] = subcommand_;
        j["tool_version"] = kToolVersion;
        j["seed"] = seed;
        j["parameters"] = params_;
        j["inputs"] = inputs_;
        for (const auto& [k, v] : extra_.items()) j[k] = v;
        j["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_text(output.string() + ".manifest.json", j.dump(2) + "\n");
    }

private:
    std::string subcommand_;
    ordered_json params_ = ordered_json::object();
    ordered_json inputs_ = ordered_json::object();
    ordered_json extra_ = ordered_json::object();
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct ModelPair {
    OccurrenceModel human;
    OccurrenceModel ai;
};

ModelPair load_models(const std::string& human_path, const std::string& ai_path) {
    auto human = load_model(human_path);
    auto ai = load_model(ai_path);
    if (!human.vocab().same_tokens(ai.vocab()))
        throw Error("vocabulary mismatch between " + human_path + " and " + ai_path);
    // Share one vocabulary object between the two models.
    OccurrenceModel ai_shared(human.vocab_ptr(), ai.probs(), ai.n_units(), ai.label());
    return {std::move(human), std::move(ai_shared)};
}

// Shared option groups.
struct ModelOptions {
    std::string human_model, ai_model;
    void add(CLI::App* sub) {
        sub->add_option("--human-model", human_model, "Human occurrence model (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--ai-model", ai_model, "AI occurrence model (JSON)")->required()->check(CLI::ExistingFile);
    }
};

struct UnitOptions {
    std::string unit = "sentence";
    std::size_t min_words = 2;
    void add(CLI::App* sub) {
        sub->add_option("--unit", unit, "Unit of analysis")->check(CLI::IsMember({"sentence", "document"}));
        sub->add_option("--min-words", min_words, "Minimum words per sentence unit")->check(CLI::PositiveNumber);
    }
    UnitKind kind() const { return parse_unit_kind(unit); }
};

struct BootOptions {
    std::size_t iters = 1000;
    double level = 0.95;
    void add(CLI::App* sub) {
        sub->add_option("--bootstrap", iters, "Bootstrap iterations")->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));
        sub->add_option("--level", level, "Confidence level")->check(CLI::Range(0.0, 1.0));
    }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Estimate the fraction of LLM-modified text in a corpus", "llmfrac"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::uint64_t seed = 0;
    std::function<void()> action;

    // fit
    auto* fit = app.add_subcommand("fit", "Fit human and AI occurrence models on a shared vocabulary");
    std::string fit_human, fit_ai, lexicon_path, exclude_path, out_human, out_ai, vocab_mode = "full";
    std::size_t min_df = kDefaultMinDf;
    UnitOptions fit_units;
    fit->add_option("--human", fit_human, "Human reference corpus (JSONL)")->required()->check(CLI::ExistingFile);
    fit->add_option("--ai", fit_ai, "AI reference corpus (JSONL)")->required()->check(CLI::ExistingFile);
    fit_units.add(fit);
    fit->add_option("--vocab-mode", vocab_mode, "Vocabulary restriction")
        ->check(CLI::IsMember({"full", "adj", "adv", "verb", "noun"}));
    fit->add_option("--lexicon", lexicon_path, "POS lexicon TSV (token<TAB>TAG)")->check(CLI::ExistingFile);
    fit->add_option("--exclude", exclude_path, "Tokens to exclude, one per line")->check(CLI::ExistingFile);
    fit->add_option("--min-df", min_df, "Minimum combined document frequency");
    fit->add_option("--out-human", out_human, "Output human model")->required();
    fit->add_option("--out-ai", out_ai, "Output AI model")->required();
    fit->add_option("--seed", seed, "Random seed");
    fit->callback([&] {
        action = [&] {
            const auto mode = parse_vocab_mode(vocab_mode);
            if (mode != VocabMode::Full && lexicon_path.empty())
                throw UsageError("--vocab-mode " + vocab_mode + " requires --lexicon");
            Manifest manifest("fit", *fit);
            manifest.input(fit_human);
            manifest.input(fit_ai);
            manifest.input(lexicon_path);
            manifest.input(exclude_path);
            const auto human_units = to_units(load_jsonl(fit_human), fit_units.kind(), fit_units.min_words);
            const auto ai_units = to_units(load_jsonl(fit_ai), fit_units.kind(), fit_units.min_words);
            std::optional<PosLexicon> lexicon;
            if (!lexicon_path.empty()) lexicon = load_pos_lexicon(lexicon_path);
            std::set<std::string> exclude;
            if (!exclude_path.empty()) exclude = load_exclusion_list(exclude_path);
            auto vocab = std::make_shared<const Vocabulary>(
                build_vocabulary(human_units, ai_units, mode, lexicon ? &*lexicon : nullptr, min_df, exclude));
            const auto human = fit_model(human_units, vocab, "human");
            const auto ai = fit_model(ai_units, vocab, "ai");
            make_parent(out_human);
            make_parent(out_ai);
            save_model(human, out_human);
            save_model(ai, out_ai);
            manifest.note("vocab_size", vocab->size());
            manifest.note("human_units", human_units.size());
            manifest.note("ai_units", ai_units.size());
            manifest.write(out_human, seed);
            manifest.write(out_ai, seed);
            out << "vocab_size=" << vocab->size() << " human_units=" << human_units.size()
                << " ai_units=" << ai_units.size() << '\n';
        };
    });

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Estimate alpha for a target corpus");
    ModelOptions est_models;
    UnitOptions est_units;
    BootOptions est_boot;
    std::string est_target, est_out;
    est_models.add(estimate);
    estimate->add_option("--target", est_target, "Target corpus (JSONL)")->required()->check(CLI::ExistingFile);
    est_units.add(estimate);
    est_boot.add(estimate);
    estimate->add_option("--seed", seed, "Random seed");
    estimate->add_option("--out", est_out, "Output estimate (JSON)")->required();
    estimate->callback([&] {
        action = [&] {
            Manifest manifest("estimate", *estimate);
            manifest.input(est_models.human_model);
            manifest.input(est_models.ai_model);
            manifest.input(est_target);
            const auto models = load_models(est_models.human_model, est_models.ai_model);
            const auto units = to_units(load_jsonl(est_target), est_units.kind(), est_units.min_words);
            if (units.empty()) throw Error("target corpus has no qualifying units");
            BootstrapOptions boot;
            boot.iters = est_boot.iters;
            boot.level = est_boot.level;
            boot.seed = seed;
            const auto est = bootstrap_ci(score_units(units, models.human, models.ai), boot);
            write_text(est_out, estimate_to_json(est));
            manifest.write(est_out, seed);
            out << "alpha=" << est.alpha << " ci=[" << *est.ci_low << ", " << *est.ci_high << "] n_units=" << est.n_units
                << (est.degenerate ? " (degenerate: models indistinguishable on this corpus)" : "") << '\n';
        };
    });

    // validate
    auto* validate = app.add_subcommand("validate", "Estimate alpha on synthetic mixtures of known alpha");
    ModelOptions val_models;
    UnitOptions val_units;
    BootOptions val_boot;
    std::string human_val, ai_val, val_out, alphas = "0:0.25:0.025";
    std::size_t val_n = 30000;
    val_models.add(validate);
    validate->add_option("--human-val", human_val, "Held-out human corpus (JSONL)")->required()->check(CLI::ExistingFile);
    validate->add_option("--ai-val", ai_val, "Held-out AI corpus (JSONL)")->required()->check(CLI::ExistingFile);
    val_units.add(validate);
    validate->add_option("--alphas", alphas, "Grid start:stop:step or comma list");
    validate->add_option("--n", val_n, "Units per synthetic target corpus")->check(CLI::PositiveNumber);
    val_boot.add(validate);
    validate->add_option("--seed", seed, "Random seed");
    validate->add_option("--out", val_out, "Output report (CSV)")->required();
    validate->callback([&] {
        action = [&] {
            SweepOptions opts;
            opts.alphas = parse_alpha_grid(alphas);
            opts.n = val_n;
            opts.iters = val_boot.iters;
            opts.level = val_boot.level;
            opts.seed = seed;
            Manifest manifest("validate", *validate);
            manifest.input(val_models.human_model);
            manifest.input(val_models.ai_model);
            manifest.input(human_val);
            manifest.input(ai_val);
            const auto models = load_models(val_models.human_model, val_models.ai_model);
            const auto human_units = to_units(load_jsonl(human_val), val_units.kind(), val_units.min_words);
            const auto ai_units = to_units(load_jsonl(ai_val), val_units.kind(), val_units.min_words);
            const auto report = sweep(human_units, ai_units, models.human, models.ai, opts);
            write_text(val_out, report.to_csv());
            manifest.note("config", report.config);
            manifest.write(val_out, seed);
            out << "rows=" << report.rows.size() << " max_abs_error=" << report.max_abs_error()
                << " mean_abs_error=" << report.mean_abs_error() << '\n';
        };
    });

    // trend
    auto* trend = app.add_subcommand("trend", "Per-period alpha estimates for a dated corpus");
    ModelOptions trend_models;
    UnitOptions trend_units;
    BootOptions trend_boot;
    std::string trend_target, trend_out, bin = "month", group_key;
    std::size_t cap = 2000;
    trend_models.add(trend);
    trend->add_option("--target", trend_target, "Dated target corpus (JSONL)")->required()->check(CLI::ExistingFile);
    trend_units.add(trend);
    trend->add_option("--bin", bin, "Time bin")->check(CLI::IsMember({"month", "quarter", "year"}));
    trend->add_option("--cap", cap, "Maximum documents sampled per bin")->check(CLI::PositiveNumber);
    trend->add_option("--group-key", group_key, "Stratify by this document field (only 'group' is supported)")
        ->check(CLI::IsMember({"group"}));
    trend_boot.add(trend);
    trend->add_option("--seed", seed, "Random seed");
    trend->add_option("--out", trend_out, "Output series (CSV)")->required();
    trend->callback([&] {
        action = [&] {
            Manifest manifest("trend", *trend);
            manifest.input(trend_models.human_model);
            manifest.input(trend_models.ai_model);
            manifest.input(trend_target);
            const auto models = load_models(trend_models.human_model, trend_models.ai_model);
            TrendOptions opts;
            opts.bin = parse_bin_kind(bin);
            opts.cap = cap;
            opts.stratify_by_group = !group_key.empty();
            opts.iters = trend_boot.iters;
            opts.level = trend_boot.level;
            opts.seed = seed;
            opts.unit_kind = trend_units.kind();
            opts.min_words = trend_units.min_words;
            const auto series = estimate_trend(load_jsonl(trend_target), models.human, models.ai, opts);
            write_text(trend_out, series.to_csv());
            manifest.note("warnings", series.warnings);
            manifest.write(trend_out, seed);
            for (const auto& w : series.warnings) err << "warning: " << w << '\n';
            out << "rows=" << series.rows.size() << '\n';
        };
    });

    // wordshift
    auto* wordshift = app.add_subcommand("wordshift", "Rank tokens by AI-vs-human log odds ratio");
    ModelOptions ws_models;
    UnitOptions ws_units;
    std::size_t top = 100;
    std::string ws_out, ws_target, ws_token, ws_bin = "month", ws_series_out;
    ws_models.add(wordshift);
    wordshift->add_option("--top", top, "Number of rows to keep")->check(CLI::PositiveNumber);
    wordshift->add_option("--out", ws_out, "Output shift table (CSV)")->required();
    wordshift->add_option("--target", ws_target, "Dated corpus for a frequency series")->check(CLI::ExistingFile);
    wordshift->add_option("--token", ws_token, "Token whose frequency series is traced");
    ws_units.add(wordshift);
    wordshift->add_option("--bin", ws_bin, "Time bin for the series")->check(CLI::IsMember({"month", "quarter", "year"}));
    wordshift->add_option("--series-out", ws_series_out, "Output frequency series (CSV)");
    wordshift->add_option("--seed", seed, "Random seed (unused; recorded)");
    wordshift->callback([&] {
        action = [&] {
            const bool series_wanted = !ws_target.empty() || !ws_token.empty() || !ws_series_out.empty();
            if (series_wanted && (ws_target.empty() || ws_token.empty() || ws_series_out.empty()))
                throw UsageError("--target, --token and --series-out must be given together");
            Manifest manifest("wordshift", *wordshift);
            manifest.input(ws_models.human_model);
            manifest.input(ws_models.ai_model);
            manifest.input(ws_target);
            const auto models = load_models(ws_models.human_model, ws_models.ai_model);
            const auto rows = shift_table(models.human, models.ai, top);
            write_text(ws_out, shift_table_csv(rows));
            manifest.write(ws_out, seed);
            if (series_wanted) {
                const auto units = dated_units(load_jsonl(ws_target), ws_units.kind(), ws_units.min_words);
                write_text(ws_series_out,
                           frequency_series_csv(frequency_series(units, ws_token, parse_bin_kind(ws_bin))));
                manifest.write(ws_series_out, seed);
            }
            out << "rows=" << rows.size() << '\n';
        };
    });

    // simulate-theory
    auto* sim = app.add_subcommand("simulate-theory", "Error-vs-sample-size scaling on a synthetic generator");
    std::size_t vocab_size = 200, shifted = 40, reps = 50, reference_units = 20000;
    double p_low = 0.01, p_high = 0.3, shift = 0.2, sim_alpha = 0.3, delta = 0.05;
    std::string ns = "2500,10000,40000", sim_out;
    bool refit = false;
    sim->add_option("--vocab-size", vocab_size, "Generator vocabulary size")->check(CLI::PositiveNumber);
    sim->add_option("--p-low", p_low, "Lower bound of human token probabilities");
    sim->add_option("--p-high", p_high, "Upper bound of human token probabilities");
    sim->add_option("--shifted", shifted, "Number of tokens whose AI probability is shifted");
    sim->add_option("--shift", shift, "Additive shift of AI probabilities");
    sim->add_option("--alpha", sim_alpha, "True mixture weight")->check(CLI::Range(0.0, 1.0));
    sim->add_option("--ns", ns, "Comma-separated, strictly increasing target sizes");
    sim->add_option("--reps", reps, "Repetitions per size (>= 10)");
    sim->add_option("--delta", delta, "Nominal failure probability reported in the header");
    sim->add_flag("--refit", refit, "Fit models on finite reference corpora instead of the true probabilities");
    sim->add_option("--reference-units", reference_units, "Reference corpus size per source with --refit");
    sim->add_option("--seed", seed, "Random seed");
    sim->add_option("--out", sim_out, "Output report (CSV with JSON header line)")->required();
    sim->callback([&] {
        action = [&] {
            Manifest manifest("simulate-theory", *sim);
            const auto gen = SyntheticGenerator::shifted(vocab_size, p_low, p_high, shifted, shift, sim_alpha, seed);
            ScalingOptions opts;
            opts.delta = delta;
            opts.refit = refit;
            opts.reference_units = reference_units;
            const auto report = error_scaling(gen, parse_size_list(ns), reps, seed, opts);
            write_text(sim_out, report.to_csv());
            manifest.write(sim_out, seed);
            out << "slope=" << report.slope << '\n';
        };
    });

    // gen-ai
    auto* gen = app.add_subcommand("gen-ai", "Generate an AI reference corpus through a chat-completion endpoint");
    std::string gen_human, endpoint, api_key_env, preset_chain = "skeleton,expand", cache_dir = ".llmfrac-cache",
                                                 gen_out;
    std::vector<std::string> template_overrides;
    DecodingParams decoding;
    std::size_t concurrency = 4;
    gen->add_option("--human", gen_human, "Human documents to rewrite (JSONL)")->required()->check(CLI::ExistingFile);
    gen->add_option("--endpoint", endpoint, "Chat-completions base URL")->required();
    gen->add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
    gen->add_option("--preset", preset_chain, "Comma-separated preset chain (skeleton,expand,direct,proofread)");
    gen->add_option("--template", template_overrides, "Override a preset template: PRESET=FILE");
    gen->add_option("--model", decoding.model, "Model name");
    gen->add_option("--temperature", decoding.temperature, "Decoding temperature");
    gen->add_option("--top-p", decoding.top_p, "Nucleus sampling threshold");
    gen->add_option("--max-tokens", decoding.max_tokens, "Maximum completion length");
    gen->add_option("--cache-dir", cache_dir, "Response cache directory");
    gen->add_option("--concurrency", concurrency, "Concurrent requests")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Random seed");
    gen->add_option("--out", gen_out, "Output AI corpus (JSONL)")->required();
    gen->callback([&] {
        action = [&] {
            GenerationOptions opts;
            opts.chain = parse_preset_chain(preset_chain);
            opts.params = decoding;
            opts.cache_dir = cache_dir;
            opts.seed = seed;
            opts.concurrency = concurrency;
            Manifest manifest("gen-ai", *gen);
            manifest.input(gen_human);
            for (const auto& spec : template_overrides) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos) throw UsageError("--template expects PRESET=FILE");
                const auto path = spec.substr(eq + 1);
                std::ifstream in(path, std::ios::binary);
                if (!in) throw Error("cannot open " + path);
                std::ostringstream ss;
                ss << in.rdbuf();
                check_template(ss.str());
                opts.templates[parse_preset(spec.substr(0, eq))] = ss.str();
                manifest.input(path);
            }
            HttpChatEndpoint http({endpoint, api_key_env});
            const auto result = generate_ai_corpus(load_jsonl(gen_human), http, opts);
            std::ostringstream jsonl;
            for (const auto& d : result.documents) {
                ordered_json obj{{"id", d.id}, {"text", d.text}};
                if (d.date) obj["date"] = format_date(*d.date);
                if (d.group) obj["group"] = *d.group;
                jsonl << obj.dump() << '\n';
            }
            write_text(gen_out, jsonl.str());
            ordered_json failures = ordered_json::array();
            for (const auto& f : result.failures) {
                failures.push_back({{"id", f.doc_id}, {"reason", f.reason}});
                err << "failed: " << f.doc_id << ": " << f.reason << '\n';
            }
            manifest.note("failures", failures);
            manifest.write(gen_out, seed);
            out << "generated=" << result.documents.size() << " failed=" << result.failures.size()
                << " endpoint_calls=" << result.endpoint_calls << " cache_hits=" << result.cache_hits << '\n';
            if (!result.failures.empty() && result.documents.empty()) throw Error("every document failed");
        };
    });

    std::vector<char*> argv;
    std::vector<std::string> storage(args);
    for (auto& a : storage) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace llmfrac
