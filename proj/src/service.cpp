#include "eog/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace eog {

using nlohmann::json;

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

// Scores one {id, text, overrides?} item. Returns the status to use when
// the item is the whole request (400 malformed, 404 unknown id).
json score_item(const ServiceState& state, const json& item, int& status) {
    if (!item.is_object() || !item.contains("id") || !item.contains("text") ||
        !item["id"].is_string() || !item["text"].is_string()) {
        status = 400;
        return {{"error", "expected object with string \"id\" and \"text\""}};
    }
    const std::string id = item["id"].get<std::string>();
    RewardConfig config = state.base_config;
    if (item.contains("overrides")) {
        try {
            config = apply_overrides(config, item["overrides"]);
        } catch (const Error& e) {
            status = 400;
            return {{"id", id}, {"error", e.what()}};
        }
    }
    if (!state.tasks.count(id)) {
        status = 404;
        return {{"id", id}, {"error", "unknown task id: " + id}};
    }
    status = 200;
    return score_trace(state.tasks, id, item["text"].get<std::string>(), config);
}

}  // namespace

std::unique_ptr<httplib::Server> make_server(std::shared_ptr<const ServiceState> state) {
    auto server = std::make_unique<httplib::Server>();

    server->Get("/healthz", [state](const httplib::Request&, httplib::Response& res) {
        reply_json(res, 200,
                   {{"status", "ok"},
                    {"triples", state->graph.size()},
                    {"entities", state->graph.entities().size()},
                    {"relations", state->graph.relations().size()},
                    {"tasks", state->tasks.size()}});
    });

    server->Post("/v1/score", [state](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply_json(res, 400, {{"error", "request body is not valid JSON"}});
            return;
        }
        int status = 0;
        const json result = score_item(*state, body, status);
        reply_json(res, status, result);
    });

    server->Post("/v1/score_batch",
                 [state](const httplib::Request& req, httplib::Response& res) {
                     const json body = json::parse(req.body, nullptr, false);
                     if (body.is_discarded() || !body.is_object() ||
                         !body.contains("items") || !body["items"].is_array()) {
                         reply_json(res, 400,
                                    {{"error", "expected object with array \"items\""}});
                         return;
                     }
                     json results = json::array();
                     for (const auto& item : body["items"]) {
                         int status = 0;
                         results.push_back(score_item(*state, item, status));
                     }
                     reply_json(res, 200, {{"results", results}});
                 });

    return server;
}

}  // namespace eog
