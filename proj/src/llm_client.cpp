#include "eog/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "eog/norm.hpp"
#include "eog/rewards.hpp"

#ifndef EOG_DEFAULT_PROMPT_DIR
#define EOG_DEFAULT_PROMPT_DIR "assets/prompts"
#endif

namespace eog {

using nlohmann::json;

void ChatEndpointConfig::validate() const {
    if (base_url.empty()) throw Error("base_url is empty (set EOG_LLM_BASE_URL)");
    if (max_retries < 0) throw Error("max_retries must be >= 0");
    if (timeout_seconds <= 0) throw Error("timeout_seconds must be > 0");
    if (max_concurrent_requests < 1) throw Error("max_concurrent_requests must be >= 1");
    if (backoff_ms < 0) throw Error("backoff_ms must be >= 0");
}

ChatEndpointConfig ChatEndpointConfig::from_env() {
    ChatEndpointConfig cfg;
    if (const char* v = std::getenv("EOG_LLM_BASE_URL")) cfg.base_url = v;
    if (const char* v = std::getenv("EOG_LLM_API_KEY")) cfg.api_key = v;
    if (const char* v = std::getenv("EOG_LLM_MODEL")) cfg.model_name = v;
    return cfg;
}

HttpChatTransport::HttpChatTransport(const ChatEndpointConfig& cfg) : cfg_(cfg) {
    // Split scheme://authority from the optional path prefix.
    const std::size_t scheme = cfg.base_url.find("://");
    if (scheme == std::string::npos) {
        throw Error("base_url must include a scheme: " + cfg.base_url);
    }
    const std::size_t slash = cfg.base_url.find('/', scheme + 3);
    host_ = slash == std::string::npos ? cfg.base_url : cfg.base_url.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : cfg.base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/chat/completions";
}

ChatHttpResult HttpChatTransport::send(const json& request) {
    httplib::Client client(host_);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    client.set_write_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    }
    auto res = client.Post(path_, headers, request.dump(), "application/json");
    if (!res) {
        throw TransportError("request to " + host_ + path_ + " failed: " +
                             httplib::to_string(res.error()));
    }
    return {res->status, res->body};
}

void MockChatTransport::enqueue(Step step) {
    std::lock_guard lock(mu_);
    script_.push_back(std::move(step));
}

void MockChatTransport::enqueue_content(const std::string& content) {
    enqueue({false, 200, content});
}

ChatHttpResult MockChatTransport::send(const json& request) {
    Step step;
    {
        std::lock_guard lock(mu_);
        requests_.push_back(request);
        in_flight_ += 1;
        max_in_flight_ = std::max(max_in_flight_, in_flight_);
        if (script_.empty()) throw Error("mock transport script exhausted");
        step = std::move(script_.front());
        script_.pop_front();
    }
    if (delay_ms_ > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    }
    {
        std::lock_guard lock(mu_);
        in_flight_ -= 1;
    }
    if (step.connect_error) throw TransportError("mock connect error");
    if (step.status == 200) {
        const json body = {
            {"id", "mock"},
            {"choices",
             json::array({{{"index", 0},
                           {"message", {{"role", "assistant"}, {"content", step.content}}},
                           {"finish_reason", "stop"}}})},
        };
        return {200, body.dump()};
    }
    return {step.status, step.content};
}

int MockChatTransport::max_in_flight() const {
    std::lock_guard lock(mu_);
    return max_in_flight_;
}

std::vector<json> MockChatTransport::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

json build_chat_request(const ChatEndpointConfig& cfg, const std::string& system_prompt,
                        const std::string& user_prompt) {
    return {
        {"model", cfg.model_name},
        {"temperature", cfg.temperature},
        {"messages",
         json::array({{{"role", "system"}, {"content", system_prompt}},
                      {{"role", "user"}, {"content", user_prompt}}})},
    };
}

std::string parse_chat_response(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty()) {
        throw Error("malformed chat response: " + body.substr(0, 200));
    }
    const json& first = j["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
        throw Error("chat response lacks message content");
    }
    return first["message"]["content"].get<std::string>();
}

struct ChatClient::Gate {
    std::counting_semaphore<> slots;
    explicit Gate(int n) : slots(n) {}
};

ChatClient::ChatClient(std::shared_ptr<ChatTransport> transport, ChatEndpointConfig cfg)
    : transport_(std::move(transport)), cfg_(std::move(cfg)) {
    cfg_.validate();
    gate_ = std::make_shared<Gate>(cfg_.max_concurrent_requests);
}

std::string ChatClient::chat(const std::string& system_prompt,
                             const std::string& user_prompt) {
    if (system_prompt.empty() || user_prompt.empty()) throw Error("empty prompt");
    gate_->slots.acquire();
    struct Release {
        Gate* gate;
        ~Release() { gate->slots.release(); }
    } release{gate_.get()};

    const json request = build_chat_request(cfg_, system_prompt, user_prompt);
    std::string last_failure;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0 && cfg_.backoff_ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
        }
        ChatHttpResult result;
        try {
            result = transport_->send(request);
        } catch (const TransportError& e) {
            last_failure = e.what();
            continue;
        }
        if (result.status >= 200 && result.status < 300) {
            return parse_chat_response(result.body);
        }
        const bool transient = result.status == 429 || result.status >= 500;
        if (!transient) {
            throw Error("chat request rejected with status " +
                        std::to_string(result.status));
        }
        last_failure = "status " + std::to_string(result.status);
    }
    throw TransportError("chat failed after " + std::to_string(cfg_.max_retries + 1) +
                         " attempts: " + last_failure);
}

std::string chat(const ChatEndpointConfig& cfg, const std::string& system_prompt,
                 const std::string& user_prompt) {
    ChatClient client(std::make_shared<HttpChatTransport>(cfg), cfg);
    return client.chat(system_prompt, user_prompt);
}

std::string load_prompt_template(const std::string& name, const std::string& dir_override) {
    const std::string dir = dir_override.empty() ? EOG_DEFAULT_PROMPT_DIR : dir_override;
    const std::string path = dir + "/" + name;
    std::ifstream in(path);
    if (!in) throw Error("cannot open prompt template: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string fill_placeholder(std::string text, const std::string& key,
                             const std::string& value) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

std::string render_graph(const KnowledgeGraph& g) {
    std::string out;
    for (const auto& t : g.triples()) {
        out += "(" + t.subject + ", " + t.relation + ", " + t.object + ")\n";
    }
    return out;
}

namespace {

constexpr const char* kSystemPrompt =
    "You are a careful assistant for reasoning over knowledge graphs. Follow the "
    "requested output format exactly.";

}  // namespace

CoTSample generate_cot(ChatClient& client, const TaskInstance& task,
                       const KnowledgeGraph& g, const CoTOptions& options) {
    const KnowledgeGraph& graph = task.subgraph ? *task.subgraph : g;
    std::string prompt = load_prompt_template("cot_generation.txt", options.prompt_dir);
    prompt = fill_placeholder(std::move(prompt), "question", task.question);
    prompt = fill_placeholder(std::move(prompt), "graph", render_graph(graph));

    CoTSample sample;
    sample.task_id = task.id;
    sample.generated_text = client.chat(kSystemPrompt, prompt);

    const Trace trace = parse_trace(sample.generated_text);
    sample.structurally_valid = trace.format_valid;
    sample.factually_valid =
        outcome_reward(trace, task.gold_answers).reward >= options.factual_threshold;
    sample.kept = sample.structurally_valid && sample.factually_valid;
    return sample;
}

namespace {

class LlmVerifier : public Verifier {
  public:
    LlmVerifier(std::shared_ptr<ChatClient> client, std::string prompt_dir)
        : client_(std::move(client)),
          template_(load_prompt_template("path_verification.txt", prompt_dir)) {}

    Verification verify(const std::string& question, const ReasoningPath& path) override {
        std::string prompt = fill_placeholder(template_, "question", question);
        prompt = fill_placeholder(std::move(prompt), "path",
                                  path.empty() ? "(the topic entity is itself the answer)"
                                               : path.render());
        const std::string reply = client_->chat(kSystemPrompt, prompt);
        const std::string norm = normalize(reply);
        if (norm.rfind("yes", 0) == 0) return {true, reply};
        if (norm.rfind("no", 0) == 0) return {false, reply};
        return {false, "unrecognized verifier reply: " + reply};
    }

  private:
    std::shared_ptr<ChatClient> client_;
    std::string template_;
};

}  // namespace

std::unique_ptr<Verifier> llm_verifier(std::shared_ptr<ChatClient> client,
                                       const std::string& prompt_dir) {
    return std::make_unique<LlmVerifier>(std::move(client), prompt_dir);
}

}  // namespace eog
