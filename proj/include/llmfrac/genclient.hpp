#pragma once

// Client for OpenAI-compatible chat-completion endpoints that turns human
// documents into an AI reference corpus by chaining prompt presets.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmfrac/corpus.hpp"

namespace llmfrac {

enum class PromptPreset { TwoStageSkeleton, TwoStageExpand, Direct, Proofread };

inline constexpr std::string_view kContentPlaceholder = "{content}";

PromptPreset parse_preset(std::string_view s);
std::string_view to_string(PromptPreset preset);
/// "skeleton,expand" -> {TwoStageSkeleton, TwoStageExpand}
std::vector<PromptPreset> parse_preset_chain(std::string_view s);

const std::string& default_template(PromptPreset preset);

/// Throws unless template_text holds exactly one placeholder.
void check_template(std::string_view template_text);
std::string render_prompt(std::string_view template_text, std::string_view content);

struct DecodingParams {
    std::string model = "gpt-4-0613";
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 2048;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
};

struct ChatRequest {
    std::string prompt;
    DecodingParams params;
    std::optional<std::uint64_t> seed;
};

struct ChatResponse {
    int status = 0;  // HTTP status; 0 for transport failure, -1 for local misconfiguration
    std::string content;
    std::string error;
};

/// Request body in the chat-completions wire format.
std::string chat_request_json(const ChatRequest& request);
/// Extracts choices[0].message.content; throws on malformed bodies.
std::string parse_chat_response(std::string_view body);

class ChatEndpoint {
public:
    virtual ~ChatEndpoint() = default;
    /// Must be safe to call concurrently.
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct EndpointConfig {
    std::string url;          // base URL, e.g. https://api.openai.com/v1
    std::string api_key_env;  // name of the environment variable holding the key
    std::chrono::seconds timeout{120};
};

class HttpChatEndpoint final : public ChatEndpoint {
public:
    explicit HttpChatEndpoint(EndpointConfig config);
    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return config_.url; }

private:
    EndpointConfig config_;
    std::string origin_;
    std::string path_;
};

struct GenerationRecord {
    std::string source_doc_id;
    std::vector<std::string> presets;
    std::size_t stage = 0;
    std::string request_hash;
    std::string response_text;
    std::string timestamp;
    std::string endpoint_id;
};

std::string record_to_json(const GenerationRecord& record);
GenerationRecord record_from_json(std::string_view json);

/// Stable digest of (preset, rendered prompt, decoding parameters, seed).
std::string request_hash(PromptPreset preset, const ChatRequest& request);

struct GenerationOptions {
    std::vector<PromptPreset> chain;
    DecodingParams params;
    std::filesystem::path cache_dir;
    std::uint64_t seed = 0;
    std::size_t concurrency = 4;
    std::size_t max_attempts = 5;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::milliseconds max_backoff{30000};
    std::map<PromptPreset, std::string> templates;  // overrides of default_template
};

struct GenerationFailure {
    std::string doc_id;
    std::string reason;
};

struct GenerationResult {
    std::vector<RawDocument> documents;  // input order, failures skipped
    std::vector<GenerationFailure> failures;
    std::size_t endpoint_calls = 0;
    std::size_t cache_hits = 0;
};

GenerationResult generate_ai_corpus(const std::vector<RawDocument>& human_docs, ChatEndpoint& endpoint,
                                    const GenerationOptions& options);

}  // namespace llmfrac
