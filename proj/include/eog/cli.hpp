#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace eog {

// Argument structs mirror the CLI flags one-to-one so tests can drive the
// commands without argv plumbing. Every command that writes an output
// also writes `<output>.manifest.json` beside it.

struct PathsArgs {
    std::string graph;
    std::string tasks;
    std::string out;
    std::size_t max_hops = 4;
    std::size_t max_paths = 256;
    bool traverse_inverse = false;
    bool force = false;
    std::string verifier = "rule";  // rule | always | llm
    std::uint64_t seed = 0;
};
int cmd_paths(const PathsArgs& args, std::ostream& out, std::ostream& err);

struct ScoreArgs {
    std::string tasks;
    std::string traces;
    std::string out;
    double alpha = 0.25;
    std::string phase = "joint";
    std::uint64_t seed = 0;
};
// Exit 0 on success, 2 when some traces could not be scored (their error
// entries still land in the output file).
int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
    std::string tasks;
    std::string traces;
    std::string graph;     // optional; enables exploration counts
    std::string group_by;  // optional label key
    std::string out;       // optional JSON report path
    std::uint64_t seed = 0;
};
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct TTestArgs {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    double baseline = 0.0;
};
int cmd_ttest(const TTestArgs& args, std::ostream& out, std::ostream& err);

struct TrainToyArgs {
    std::string out_dir;
    // family
    std::uint64_t family_seed = 1;
    std::size_t n_entities = 40;
    std::size_t n_relations = 12;
    double edge_density = 0.6;
    std::size_t gold_hops = 2;
    std::size_t distractor_branching = 3;
    std::size_t n_tasks = 8;
    // schedule
    std::size_t phase1_steps = 300;
    std::size_t phase2_steps = 300;
    std::size_t group_size = 6;
    double learning_rate = 0.7;
    double alpha = 0.25;
    double clip_epsilon = 0.2;
    double kl_beta = 0.0;
    std::size_t inner_epochs = 3;
    std::uint64_t seed = 1;
};
int cmd_train_toy(const TrainToyArgs& args, std::ostream& out, std::ostream& err);

struct ServeArgs {
    std::string graph;
    std::string tasks;
    std::string host = "127.0.0.1";
    int port = 8080;
    double alpha = 0.25;
    std::string phase = "joint";
};
int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err);

// Full argv entry point (CLI11 wiring); returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace eog
