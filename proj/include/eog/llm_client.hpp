#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eog/kg.hpp"
#include "eog/pathfind.hpp"

namespace eog {

struct ChatEndpointConfig {
    std::string base_url;  // scheme://host[:port][/prefix]
    std::string api_key;
    std::string model_name;
    double temperature = 0.2;
    int max_retries = 3;
    int timeout_seconds = 120;
    int max_concurrent_requests = 4;
    int backoff_ms = 250;  // doubles per retry; zero in tests

    void validate() const;
    // Reads EOG_LLM_BASE_URL, EOG_LLM_API_KEY, EOG_LLM_MODEL.
    static ChatEndpointConfig from_env();
};

struct TransportError : Error {
    using Error::Error;
};

struct ChatHttpResult {
    int status = 0;
    std::string body;
};

// One request attempt. Implementations throw TransportError when the
// request never produced a response (connect failure, timeout).
class ChatTransport {
  public:
    virtual ~ChatTransport() = default;
    virtual ChatHttpResult send(const nlohmann::json& request) = 0;
};

// POSTs to {base_url}/chat/completions with a bearer token.
class HttpChatTransport : public ChatTransport {
  public:
    explicit HttpChatTransport(const ChatEndpointConfig& cfg);
    ChatHttpResult send(const nlohmann::json& request) override;

  private:
    std::string host_;  // scheme://authority
    std::string path_;
    ChatEndpointConfig cfg_;
};

// Scripted transport for tests: replays queued results in order and
// tracks the high-water mark of concurrent in-flight requests.
class MockChatTransport : public ChatTransport {
  public:
    struct Step {
        bool connect_error = false;
        int status = 200;
        std::string content;  // completion text placed in the response body
    };

    void enqueue(Step step);
    // Convenience: a 200 response completing with `content`.
    void enqueue_content(const std::string& content);
    void set_delay_ms(int ms) { delay_ms_ = ms; }

    ChatHttpResult send(const nlohmann::json& request) override;

    int max_in_flight() const;
    std::vector<nlohmann::json> requests() const;

  private:
    mutable std::mutex mu_;
    std::deque<Step> script_;
    std::vector<nlohmann::json> requests_;
    int in_flight_ = 0;
    int max_in_flight_ = 0;
    int delay_ms_ = 0;
};

nlohmann::json build_chat_request(const ChatEndpointConfig& cfg,
                                  const std::string& system_prompt,
                                  const std::string& user_prompt);
std::string parse_chat_response(const std::string& body);

// Retrying chat-completion client with a concurrency bound shared across
// threads. The bound counts whole chat() calls, retries included.
class ChatClient {
  public:
    ChatClient(std::shared_ptr<ChatTransport> transport, ChatEndpointConfig cfg);

    // Returns the completion text; retries transient failures (connect
    // errors, 429, 5xx) with exponential backoff, then throws
    // TransportError. Any other non-2xx status throws immediately with
    // the status code in the message.
    std::string chat(const std::string& system_prompt, const std::string& user_prompt);

    const ChatEndpointConfig& config() const { return cfg_; }

  private:
    std::shared_ptr<ChatTransport> transport_;
    ChatEndpointConfig cfg_;
    struct Gate;
    std::shared_ptr<Gate> gate_;
};

// One-shot convenience over an HTTP transport.
std::string chat(const ChatEndpointConfig& cfg, const std::string& system_prompt,
                 const std::string& user_prompt);

// Prompt templates shipped as text assets. Placeholders: {question},
// {graph}, {path}.
std::string load_prompt_template(const std::string& name,
                                 const std::string& dir_override = "");
std::string fill_placeholder(std::string text, const std::string& key,
                             const std::string& value);
std::string render_graph(const KnowledgeGraph& g);

struct CoTSample {
    std::string task_id;
    std::string generated_text;
    bool structurally_valid = false;
    bool factually_valid = false;
    bool kept = false;
};

struct CoTOptions {
    double factual_threshold = 1.0;  // minimum outcome reward to keep
    std::string prompt_dir;          // empty uses the installed assets
};

// Prompts the model for a tagged reasoning trace over the task's graph
// and filters it structurally (tag format) and factually (outcome reward
// against gold). kept = both.
CoTSample generate_cot(ChatClient& client, const TaskInstance& task,
                       const KnowledgeGraph& g, const CoTOptions& options = {});

// Verifier that asks the model whether a path answers the question,
// mapping a leading yes/no (case-insensitive) to the verdict; anything
// else rejects with the reply kept as rationale.
std::unique_ptr<Verifier> llm_verifier(std::shared_ptr<ChatClient> client,
                                       const std::string& prompt_dir = "");

}  // namespace eog
