#pragma once

#include <memory>
#include <string>

#include "eog/kg.hpp"
#include "eog/scoring.hpp"

namespace httplib {
class Server;
}

namespace eog {

// Immutable data the scoring service shares across requests.
struct ServiceState {
    KnowledgeGraph graph;
    TaskIndex tasks;
    RewardConfig base_config;
};

// Builds a server with POST /v1/score, POST /v1/score_batch, and GET
// /healthz over the shared state. The caller owns listen/stop, which
// keeps the routes testable in-process.
std::unique_ptr<httplib::Server> make_server(std::shared_ptr<const ServiceState> state);

}  // namespace eog
