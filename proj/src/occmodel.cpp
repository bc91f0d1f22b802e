#include "llmfrac/occmodel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llmfrac/digest.hpp"
#include "llmfrac/error.hpp"

namespace llmfrac {

namespace {

std::string format_prob(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", p);
    return buf;
}

std::string model_checksum(const std::string& label, VocabMode mode, std::size_t min_df, std::size_t n_units,
                           const std::vector<std::string>& tokens, const Eigen::VectorXd& probs) {
    std::string canon = label + '\n' + std::string(to_string(mode)) + '\n' + std::to_string(min_df) + '\n' +
                        std::to_string(n_units) + '\n';
    for (const auto& t : tokens) canon += t + '\n';
    for (Eigen::Index i = 0; i < probs.size(); ++i) canon += format_prob(probs[i]) + '\n';
    return sha256_hex(canon);
}

}  // namespace

OccurrenceModel::OccurrenceModel(std::shared_ptr<const Vocabulary> vocab, Eigen::VectorXd probs,
                                 std::size_t n_units, std::string label)
    : vocab_(std::move(vocab)), probs_(std::move(probs)), n_units_(n_units), label_(std::move(label)) {
    if (!vocab_) throw Error("occurrence model needs a vocabulary");
    if (static_cast<std::size_t>(probs_.size()) != vocab_->size())
        throw Error("probability vector length does not match vocabulary");
    if (!((probs_.array() > 0.0).all() && (probs_.array() < 1.0).all()))
        throw Error("occurrence probabilities must lie strictly inside (0, 1)");
    const Eigen::ArrayXd log_absent = (1.0 - probs_.array()).log();
    presence_weight_ = (probs_.array().log() - log_absent).matrix();
    base_log_mass_ = log_absent.sum();
}

double OccurrenceModel::raw_rate(std::size_t token_index) const {
    if (n_units_ == 0) return 0.0;
    const double n = static_cast<double>(n_units_);
    const double count = std::round(probs_[static_cast<Eigen::Index>(token_index)] * (n + 1.0) - 0.5);
    return count / n;
}

OccurrenceModel fit_model(const std::vector<Unit>& units, std::shared_ptr<const Vocabulary> vocab,
                          std::string label) {
    if (units.empty()) throw Error("empty reference corpus");
    if (!vocab) throw Error("occurrence model needs a vocabulary");
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab->size()));
    for (const auto& u : units)
        for (const auto& t : u.tokens)
            if (auto i = vocab->index_of(t)) counts[static_cast<Eigen::Index>(*i)] += 1.0;
    const double n = static_cast<double>(units.size());
    Eigen::VectorXd probs = (counts.array() + 0.5) / (n + 1.0);
    return OccurrenceModel(std::move(vocab), std::move(probs), units.size(), std::move(label));
}

double unit_log_likelihood(const OccurrenceModel& model, const Unit& unit) {
    double ll = model.base_log_mass();
    const auto& w = model.presence_weights();
    for (const auto& t : unit.tokens)
        if (auto i = model.vocab().index_of(t)) ll += w[static_cast<Eigen::Index>(*i)];
    return ll;
}

std::string serialize_model(const OccurrenceModel& model) {
    const auto& vocab = model.vocab();
    std::ostringstream out;
    out << "{\"format_version\":" << kModelFormatVersion
        << ",\"label\":" << nlohmann::json(model.label()).dump()
        << ",\"mode\":" << nlohmann::json(std::string(to_string(vocab.mode()))).dump()
        << ",\"min_df\":" << vocab.min_df() << ",\"n_units\":" << model.n_units()
        << ",\"checksum\":\""
        << model_checksum(model.label(), vocab.mode(), vocab.min_df(), model.n_units(), vocab.tokens(),
                          model.probs())
        << "\",\n\"tokens\":" << nlohmann::json(vocab.tokens()).dump() << ",\n\"probs\":[";
    for (Eigen::Index i = 0; i < model.probs().size(); ++i) {
        if (i) out << ',';
        out << format_prob(model.probs()[i]);
    }
    out << "]}\n";
    return out.str();
}

void save_model(const OccurrenceModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << serialize_model(model);
    if (!out) throw Error("write failed: " + path.string());
}

OccurrenceModel parse_model(std::string_view content) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("corrupt model file: ") + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw Error("unsupported model format version " + std::to_string(version) + " (this build reads version " +
                        std::to_string(kModelFormatVersion) + ")");
        auto label = j.at("label").get<std::string>();
        const auto mode = parse_vocab_mode(j.at("mode").get<std::string>());
        const auto min_df = j.at("min_df").get<std::size_t>();
        const auto n_units = j.at("n_units").get<std::size_t>();
        auto tokens = j.at("tokens").get<std::vector<std::string>>();
        const auto probs_list = j.at("probs").get<std::vector<double>>();
        if (probs_list.size() != tokens.size()) throw Error("corrupt model file: tokens and probs differ in length");
        Eigen::VectorXd probs = Eigen::Map<const Eigen::VectorXd>(probs_list.data(),
                                                                  static_cast<Eigen::Index>(probs_list.size()));
        const auto expected = j.at("checksum").get<std::string>();
        if (model_checksum(label, mode, min_df, n_units, tokens, probs) != expected)
            throw Error("model checksum mismatch");
        auto vocab = std::make_shared<const Vocabulary>(std::move(tokens), mode, min_df);
        return OccurrenceModel(std::move(vocab), std::move(probs), n_units, std::move(label));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("corrupt model file: ") + e.what());
    }
}

OccurrenceModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_model(ss.str());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace llmfrac
