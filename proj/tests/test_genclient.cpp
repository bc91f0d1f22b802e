#include <doctest.h>

#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "llmfrac/error.hpp"
#include "llmfrac/genclient.hpp"
#include "test_util.hpp"

using namespace llmfrac;

namespace {

// Echoes the prompt unless a scripted response is queued.
class RecordingEndpoint : public ChatEndpoint {
public:
    ChatResponse complete(const ChatRequest& request) override {
        std::lock_guard lock(mu_);
        prompts.push_back(request.prompt);
        if (!scripted.empty()) {
            auto r = scripted.front();
            scripted.pop_front();
            return r;
        }
        return {200, reply ? *reply : "echo: " + request.prompt, {}};
    }
    std::string id() const override { return "mock://recording"; }

    std::deque<ChatResponse> scripted;
    std::optional<std::string> reply;
    std::vector<std::string> prompts;

private:
    std::mutex mu_;
};

GenerationOptions fast_options(std::vector<PromptPreset> chain, std::filesystem::path cache = {}) {
    GenerationOptions o;
    o.chain = std::move(chain);
    o.cache_dir = std::move(cache);
    o.base_backoff = std::chrono::milliseconds(1);
    o.max_backoff = std::chrono::milliseconds(5);
    return o;
}

const std::vector<RawDocument> kDocs = {
    {"d1", "We study sparse occurrence models.", Date{std::chrono::year{2023}, std::chrono::month{4}, std::chrono::day{2}},
     "urban"},
    {"d2", "A second abstract about peer review.", {}, {}},
};

}  // namespace

TEST_CASE("presets and templates") {
    CHECK(parse_preset_chain("skeleton,expand") ==
          std::vector<PromptPreset>{PromptPreset::TwoStageSkeleton, PromptPreset::TwoStageExpand});
    CHECK(parse_preset("proofread") == PromptPreset::Proofread);
    CHECK_THROWS_AS(parse_preset("rewrite"), UsageError);
    for (auto p : {PromptPreset::TwoStageSkeleton, PromptPreset::TwoStageExpand, PromptPreset::Direct,
                   PromptPreset::Proofread})
        CHECK_NOTHROW(check_template(default_template(p)));
    CHECK_THROWS_AS(check_template("no placeholder"), Error);
    CHECK_THROWS_AS(check_template("{content} twice {content}"), Error);
    CHECK(render_prompt("Fix: {content}!", "text") == "Fix: text!");
}

TEST_CASE("wire format") {
    ChatRequest req{"hello", {}, 9};
    const auto j = nlohmann::json::parse(chat_request_json(req));
    CHECK(j["model"] == "gpt-4-0613");
    CHECK(j["temperature"] == 1.0);
    CHECK(j["top_p"] == 1.0);
    CHECK(j["max_tokens"] == 2048);
    CHECK(j["messages"][0]["role"] == "user");
    CHECK(j["messages"][0]["content"] == "hello");
    CHECK(j["seed"] == 9);

    CHECK(parse_chat_response(R"({"choices":[{"message":{"role":"assistant","content":"hi"}}]})") == "hi");
    CHECK_THROWS_AS(parse_chat_response("{}"), Error);
    CHECK_THROWS_AS(parse_chat_response("not json"), Error);

    ChatRequest other = req;
    other.params.temperature = 0.5;
    CHECK(request_hash(PromptPreset::Direct, req) != request_hash(PromptPreset::Direct, other));
    CHECK(request_hash(PromptPreset::Direct, req) != request_hash(PromptPreset::Proofread, req));
    CHECK(request_hash(PromptPreset::Direct, req) == request_hash(PromptPreset::Direct, ChatRequest{"hello", {}, 9}));
}

TEST_CASE("generation record round-trip") {
    GenerationRecord r{"d1", {"skeleton", "expand"}, 1, "abc", "text", "2024-01-01T00:00:00Z", "mock"};
    const auto back = record_from_json(record_to_json(r));
    CHECK(back.source_doc_id == "d1");
    CHECK(back.presets == r.presets);
    CHECK(back.stage == 1);
    CHECK(back.response_text == "text");
}

TEST_CASE("direct preset through an echo endpoint") {
    RecordingEndpoint ep;
    const auto res = generate_ai_corpus(kDocs, ep, fast_options({PromptPreset::Direct}));
    REQUIRE(res.documents.size() == 2);
    CHECK(res.documents[0].id == "d1-ai");
    CHECK(res.documents[0].text == "echo: " + render_prompt(default_template(PromptPreset::Direct), kDocs[0].text));
    CHECK(res.documents[0].date == kDocs[0].date);
    CHECK(res.documents[0].group == kDocs[0].group);
    CHECK(res.endpoint_calls == 2);
    CHECK(res.failures.empty());
}

TEST_CASE("two-stage chain and the cache") {
    testutil::TempDir dir;
    const std::vector<RawDocument> one = {kDocs[0]};
    const auto opts = fast_options({PromptPreset::TwoStageSkeleton, PromptPreset::TwoStageExpand}, dir / "cache");

    RecordingEndpoint cold;
    const auto first = generate_ai_corpus(one, cold, opts);
    CHECK(cold.prompts.size() == 2);
    CHECK(first.endpoint_calls == 2);
    // The second stage sees the first stage's output.
    CHECK(cold.prompts[1].find("echo: ") != std::string::npos);

    RecordingEndpoint warm;
    const auto second = generate_ai_corpus(one, warm, opts);
    CHECK(warm.prompts.empty());
    CHECK(second.cache_hits == 2);
    REQUIRE(second.documents.size() == 1);
    CHECK(second.documents[0].text == first.documents[0].text);

    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "cache")) {
        CHECK(e.path().extension() == ".json");
        ++files;
    }
    CHECK(files == 2);
}

TEST_CASE("retries and failures") {
    SUBCASE("transient statuses are retried") {
        RecordingEndpoint ep;
        ep.scripted = {{429, {}, "rate"}, {503, {}, "down"}, {0, {}, "reset"}};
        const auto res = generate_ai_corpus({kDocs[0]}, ep, fast_options({PromptPreset::Direct}));
        CHECK(res.documents.size() == 1);
        CHECK(res.endpoint_calls == 4);
    }
    SUBCASE("gives up after five attempts") {
        RecordingEndpoint ep;
        for (int i = 0; i < 10; ++i) ep.scripted.push_back({500, {}, "boom"});
        const auto res = generate_ai_corpus({kDocs[0]}, ep, fast_options({PromptPreset::Direct}));
        CHECK(res.documents.empty());
        REQUIRE(res.failures.size() == 1);
        CHECK(res.failures[0].doc_id == "d1");
        CHECK(res.endpoint_calls == 5);
    }
    SUBCASE("client errors are not retried") {
        RecordingEndpoint ep;
        ep.scripted = {{400, {}, "bad request"}};
        const auto res = generate_ai_corpus({kDocs[0]}, ep, fast_options({PromptPreset::Direct}));
        CHECK(res.endpoint_calls == 1);
        CHECK(res.failures.size() == 1);
    }
    SUBCASE("empty completion fails one document and processing continues") {
        RecordingEndpoint ep;
        ep.scripted = {{200, "", {}}};
        auto opts = fast_options({PromptPreset::Direct});
        opts.concurrency = 1;
        const auto res = generate_ai_corpus(kDocs, ep, opts);
        REQUIRE(res.failures.size() == 1);
        CHECK(res.failures[0].doc_id == "d1");
        CHECK(res.failures[0].reason.find("empty completion") != std::string::npos);
        REQUIRE(res.documents.size() == 1);
        CHECK(res.documents[0].id == "d2-ai");
    }
}

TEST_CASE("generation is a pure function of its inputs") {
    std::vector<RawDocument> docs;
    for (int i = 0; i < 20; ++i) docs.push_back({"doc" + std::to_string(i), "Text number " + std::to_string(i), {}, {}});
    RecordingEndpoint a, b;
    auto opts = fast_options({PromptPreset::TwoStageSkeleton, PromptPreset::TwoStageExpand});
    opts.concurrency = 4;
    const auto ra = generate_ai_corpus(docs, a, opts);
    opts.concurrency = 1;
    const auto rb = generate_ai_corpus(docs, b, opts);
    REQUIRE(ra.documents.size() == rb.documents.size());
    for (std::size_t i = 0; i < ra.documents.size(); ++i) {
        CHECK(ra.documents[i].id == rb.documents[i].id);
        CHECK(ra.documents[i].text == rb.documents[i].text);
    }
}

TEST_CASE("HTTP endpoint against a local server keeps the key out of artifacts") {
    const std::string secret = "sk-test-4f1c9a77d2e0b3";
    const std::string env = "LLMFRAC_UNIT_TEST_KEY";
    ::setenv(env.c_str(), secret.c_str(), 1);

    httplib::Server server;
    std::atomic<int> authorized{0};
    std::string last_body;
    std::mutex mu;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (req.get_header_value("Authorization") == "Bearer " + secret) ++authorized;
        {
            std::lock_guard lock(mu);
            last_body = req.body;
        }
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        out["choices"][0]["message"]["role"] = "assistant";
        out["choices"][0]["message"]["content"] = "rewritten: " + body["messages"][0]["content"].get<std::string>();
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    testutil::TempDir dir;
    HttpChatEndpoint ep({"http://127.0.0.1:" + std::to_string(port) + "/v1", env, std::chrono::seconds(10)});
    auto opts = fast_options({PromptPreset::Proofread}, dir / "cache");
    const auto res = generate_ai_corpus(kDocs, ep, opts);

    server.stop();
    th.join();

    CHECK(res.failures.empty());
    REQUIRE(res.documents.size() == 2);
    CHECK(res.documents[1].text.rfind("rewritten: ", 0) == 0);
    CHECK(authorized == 2);
    CHECK(last_body.find(secret) == std::string::npos);

    for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path()))
        if (e.is_regular_file()) CHECK(testutil::read_file(e.path()).find(secret) == std::string::npos);
    for (const auto& d : res.documents) CHECK(d.text.find(secret) == std::string::npos);

    // Missing key: no request goes out and the error names the variable only.
    ::unsetenv(env.c_str());
    const auto missing = ep.complete(ChatRequest{"x", {}, {}});
    CHECK(missing.status == -1);
    CHECK(missing.error.find(env) != std::string::npos);
}

TEST_CASE("unreachable endpoint reports a transport failure") {
    HttpChatEndpoint ep({"http://127.0.0.1:1/v1", "", std::chrono::seconds(2)});
    const auto r = ep.complete(ChatRequest{"x", {}, {}});
    CHECK(r.status == 0);
    CHECK_FALSE(r.error.empty());
}
