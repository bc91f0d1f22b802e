#include "llmfrac/genclient.hpp"

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "llmfrac/digest.hpp"
#include "llmfrac/error.hpp"
#include "llmfrac/rng.hpp"

namespace llmfrac {

namespace {

using nlohmann::json;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::optional<GenerationRecord> read_cache(const std::filesystem::path& dir, const std::string& hash) {
    if (dir.empty()) return std::nullopt;
    const auto path = dir / (hash + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        auto rec = record_from_json(ss.str());
        if (rec.request_hash != hash || rec.response_text.empty()) return std::nullopt;
        return rec;
    } catch (const std::exception&) {
        return std::nullopt;  // unreadable entries are regenerated
    }
}

void write_cache(const std::filesystem::path& dir, const GenerationRecord& rec) {
    if (dir.empty()) return;
    static std::atomic<std::uint64_t> counter{0};
    std::filesystem::create_directories(dir);
    const auto final_path = dir / (rec.request_hash + ".json");
    const auto tmp = dir / (rec.request_hash + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write cache file " + tmp.string());
        out << record_to_json(rec);
        if (!out) throw Error("cannot write cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
}

}  // namespace

PromptPreset parse_preset(std::string_view s) {
    if (s == "skeleton") return PromptPreset::TwoStageSkeleton;
    if (s == "expand") return PromptPreset::TwoStageExpand;
    if (s == "direct") return PromptPreset::Direct;
    if (s == "proofread") return PromptPreset::Proofread;
    throw UsageError("unknown preset '" + std::string(s) + "' (expected skeleton|expand|direct|proofread)");
}

std::string_view to_string(PromptPreset preset) {
    switch (preset) {
        case PromptPreset::TwoStageSkeleton: return "skeleton";
        case PromptPreset::TwoStageExpand: return "expand";
        case PromptPreset::Direct: return "direct";
        case PromptPreset::Proofread: return "proofread";
    }
    return "direct";
}

std::vector<PromptPreset> parse_preset_chain(std::string_view s) {
    std::vector<PromptPreset> chain;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string_view::npos) comma = s.size();
        chain.push_back(parse_preset(s.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return chain;
}

const std::string& default_template(PromptPreset preset) {
    static const std::string skeleton =
        "The aim here is to reverse-engineer the reviewer's writing process into two distinct phases: drafting a "
        "skeleton (outline) of the review and then expanding this outline into a detailed, complete review. The "
        "process simulates how a reviewer might first organize their thoughts and key points in a structured, "
        "concise form before elaborating on each point to provide a comprehensive evaluation of the paper.\n\n"
        "Now as a first step, given a complete peer review, reverse-engineer it into a concise skeleton.\n\n"
        "{content}";
    static const std::string expand =
        "Expand the skeleton of the review into a official review as the following format:\n"
        "Summary:\n\nStrengths:\n\nWeaknesses:\n\nQuestions:\n\n"
        "{content}";
    static const std::string direct =
        "Write a complete piece of text covering the content below, in the same genre and at a similar length.\n\n"
        "{content}";
    static const std::string proofread =
        "Your task is to proofread the provided sentence for grammatical accuracy. Ensure that the corrections "
        "introduce minimal distortion to the original content.\n\n"
        "{content}";
    switch (preset) {
        case PromptPreset::TwoStageSkeleton: return skeleton;
        case PromptPreset::TwoStageExpand: return expand;
        case PromptPreset::Direct: return direct;
        case PromptPreset::Proofread: return proofread;
    }
    return direct;
}

void check_template(std::string_view t) {
    const auto first = t.find(kContentPlaceholder);
    if (first == std::string_view::npos) throw Error("prompt template has no {content} placeholder");
    if (t.find(kContentPlaceholder, first + 1) != std::string_view::npos)
        throw Error("prompt template has more than one {content} placeholder");
}

std::string render_prompt(std::string_view t, std::string_view content) {
    check_template(t);
    const auto at = t.find(kContentPlaceholder);
    std::string out;
    out.reserve(t.size() + content.size());
    out.append(t.substr(0, at));
    out.append(content);
    out.append(t.substr(at + kContentPlaceholder.size()));
    return out;
}

std::string chat_request_json(const ChatRequest& r) {
    nlohmann::ordered_json j;
    j["model"] = r.params.model;
    j["messages"] = json::array({{{"role", "user"}, {"content", r.prompt}}});
    j["temperature"] = r.params.temperature;
    j["top_p"] = r.params.top_p;
    j["max_tokens"] = r.params.max_tokens;
    j["frequency_penalty"] = r.params.frequency_penalty;
    j["presence_penalty"] = r.params.presence_penalty;
    if (r.seed) j["seed"] = *r.seed;
    return j.dump();
}

std::string parse_chat_response(std::string_view body) {
    try {
        const auto j = json::parse(body);
        const auto& msg = j.at("choices").at(0).at("message");
        const auto& content = msg.at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed chat-completion response: ") + e.what());
    }
}

HttpChatEndpoint::HttpChatEndpoint(EndpointConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) throw UsageError("endpoint URL needs a scheme: " + config_.url);
    const auto path_start = config_.url.find('/', scheme_end + 3);
    origin_ = config_.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? std::string() : config_.url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    constexpr std::string_view suffix = "/chat/completions";
    if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0)
        path += suffix;
    path_ = path;
}

ChatResponse HttpChatEndpoint::complete(const ChatRequest& request) {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            return {-1, {}, "environment variable " + config_.api_key_env + " is not set"};
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(path_, headers, chat_request_json(request), "application/json");
    if (!res) return {0, {}, "transport error: " + httplib::to_string(res.error())};
    ChatResponse out;
    out.status = res->status;
    if (res->status != 200) {
        out.error = "HTTP " + std::to_string(res->status);
        return out;
    }
    try {
        out.content = parse_chat_response(res->body);
    } catch (const Error& e) {
        out.status = 0;
        out.error = e.what();
    }
    return out;
}

std::string record_to_json(const GenerationRecord& r) {
    nlohmann::ordered_json j;
    j["source_doc_id"] = r.source_doc_id;
    j["presets"] = r.presets;
    j["stage"] = r.stage;
    j["request_hash"] = r.request_hash;
    j["response_text"] = r.response_text;
    j["timestamp"] = r.timestamp;
    j["endpoint_id"] = r.endpoint_id;
    return j.dump(2) + "\n";
}

GenerationRecord record_from_json(std::string_view text) {
    const auto j = json::parse(text);
    GenerationRecord r;
    r.source_doc_id = j.at("source_doc_id").get<std::string>();
    r.presets = j.at("presets").get<std::vector<std::string>>();
    r.stage = j.at("stage").get<std::size_t>();
    r.request_hash = j.at("request_hash").get<std::string>();
    r.response_text = j.at("response_text").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.endpoint_id = j.at("endpoint_id").get<std::string>();
    return r;
}

std::string request_hash(PromptPreset preset, const ChatRequest& request) {
    nlohmann::ordered_json j;
    j["preset"] = to_string(preset);
    j["request"] = json::parse(chat_request_json(request));
    return sha256_hex(j.dump());
}

GenerationResult generate_ai_corpus(const std::vector<RawDocument>& human_docs, ChatEndpoint& endpoint,
                                    const GenerationOptions& options) {
    if (options.chain.empty()) throw UsageError("preset chain is empty");
    if (options.max_attempts < 1) throw UsageError("max_attempts must be at least 1");
    std::vector<std::string> templates;
    std::vector<std::string> chain_names;
    for (auto preset : options.chain) {
        auto it = options.templates.find(preset);
        templates.push_back(it != options.templates.end() ? it->second : default_template(preset));
        check_template(templates.back());
        chain_names.emplace_back(to_string(preset));
    }

    struct Slot {
        std::optional<RawDocument> doc;
        std::optional<std::string> failure;
    };
    std::vector<Slot> slots(human_docs.size());
    std::atomic<std::size_t> calls{0}, hits{0}, next{0};

    auto process = [&](std::size_t d) {
        const auto& src = human_docs[d];
        std::string content = src.text;
        for (std::size_t stage = 0; stage < options.chain.size(); ++stage) {
            ChatRequest req{render_prompt(templates[stage], content), options.params, options.seed};
            const auto hash = request_hash(options.chain[stage], req);
            if (auto cached = read_cache(options.cache_dir, hash)) {
                ++hits;
                content = cached->response_text;
                continue;
            }
            ChatResponse res;
            std::size_t attempts = 0;
            for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
                if (attempt > 0) {
                    Rng rng = substream(options.seed, fnv1a64(src.id), stage, attempt);
                    const double factor = static_cast<double>(1ULL << std::min<std::size_t>(attempt - 1, 20));
                    const double base = static_cast<double>(options.base_backoff.count()) * factor;
                    const double wait = std::min(base * (1.0 + uniform01(rng)),
                                                 static_cast<double>(options.max_backoff.count()));
                    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));
                }
                ++calls;
                ++attempts;
                res = endpoint.complete(req);
                if (res.status == 200 || !retryable(res.status)) break;
            }
            if (res.status != 200) {
                slots[d].failure = "stage " + std::to_string(stage + 1) + " (" + chain_names[stage] +
                                   "): " + (res.error.empty() ? "HTTP " + std::to_string(res.status) : res.error) +
                                   " after " + std::to_string(attempts) + " attempt(s)";
                return;
            }
            if (res.content.empty()) {
                slots[d].failure = "stage " + std::to_string(stage + 1) + " (" + chain_names[stage] +
                                   "): empty completion";
                return;
            }
            GenerationRecord rec{src.id, chain_names, stage, hash, res.content, utc_timestamp(), endpoint.id()};
            write_cache(options.cache_dir, rec);
            content = res.content;
        }
        RawDocument out;
        out.id = src.id + "-ai";
        out.text = content;
        out.date = src.date;
        out.group = src.group;
        slots[d].doc = std::move(out);
    };

    auto worker = [&] {
        for (std::size_t d = next++; d < human_docs.size(); d = next++) {
            try {
                process(d);
            } catch (const std::exception& e) {
                slots[d].failure = e.what();
            }
        }
    };
    {
        const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.concurrency, human_docs.size()));
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
        worker();
    }

    GenerationResult result;
    for (std::size_t d = 0; d < slots.size(); ++d) {
        if (slots[d].doc) result.documents.push_back(std::move(*slots[d].doc));
        if (slots[d].failure) result.failures.push_back({human_docs[d].id, *slots[d].failure});
    }
    result.endpoint_calls = calls;
    result.cache_hits = hits;
    return result;
}

}  // namespace llmfrac
