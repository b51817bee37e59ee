#include "eog/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "eog/evalkit.hpp"
#include "eog/kg.hpp"
#include "eog/llm_client.hpp"
#include "eog/manifest.hpp"
#include "eog/pathfind.hpp"
#include "eog/scoring.hpp"
#include "eog/service.hpp"
#include "eog/toysim.hpp"
#include "eog/trace.hpp"

namespace eog {

using nlohmann::json;

namespace {

std::unique_ptr<Verifier> make_verifier(const std::string& name) {
    if (name == "always") return std::make_unique<AlwaysVerifier>();
    if (name == "rule") return std::make_unique<KeywordOverlapVerifier>();
    if (name == "llm") {
        const ChatEndpointConfig cfg = ChatEndpointConfig::from_env();
        auto client =
            std::make_shared<ChatClient>(std::make_shared<HttpChatTransport>(cfg), cfg);
        return llm_verifier(std::move(client));
    }
    throw Error("unknown verifier: " + name + " (expected rule, always, or llm)");
}

void write_command_manifest(const std::string& out_path, const std::string& command,
                            std::uint64_t seed, const json& config,
                            const std::vector<std::string>& inputs) {
    write_manifest_file(out_path + ".manifest.json",
                        make_manifest(command, seed, config, inputs));
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

int cmd_paths(const PathsArgs& args, std::ostream& out, std::ostream& err) {
    const KnowledgeGraph graph = load_graph_file(args.graph);
    std::vector<TaskInstance> tasks = load_tasks_file(args.tasks);

    SearchConfig config;
    config.max_hops = args.max_hops;
    config.max_paths = args.max_paths;
    config.traverse_inverse = args.traverse_inverse;

    const auto verifier = make_verifier(args.verifier);
    const GoldPathReport report =
        build_gold_paths(tasks, graph, *verifier, config, args.force);

    for (const auto& warning : report.warnings) err << "warning: " << warning << "\n";
    for (const auto& task : tasks) {
        out << task.id << ": " << task.gold_paths.size() << " gold path"
            << (task.gold_paths.size() == 1 ? "" : "s") << "\n";
    }

    save_tasks_file(args.out, tasks);
    write_command_manifest(args.out, "paths", args.seed,
                           {{"max_hops", args.max_hops},
                            {"max_paths", args.max_paths},
                            {"traverse_inverse", args.traverse_inverse},
                            {"force", args.force},
                            {"verifier", args.verifier}},
                           {args.graph, args.tasks});
    out << "updated " << report.tasks_updated << ", skipped " << report.tasks_skipped
        << ", unreached answers " << report.answers_missing << "\n";
    return 0;
}

int cmd_score(const ScoreArgs& args, std::ostream& out, std::ostream& err) {
    const TaskIndex tasks = index_tasks(load_tasks_file(args.tasks));
    const std::vector<TraceRecord> traces = load_traces_file(args.traces);

    RewardConfig config;
    config.alpha = args.alpha;
    config.phase = parse_phase(args.phase);
    config.validate();

    std::ofstream out_file(args.out);
    if (!out_file) throw Error("cannot write " + args.out);

    std::size_t failures = 0;
    for (const auto& record : traces) {
        json line;
        try {
            line = score_trace(tasks, record.id, record.text, config);
        } catch (const Error& e) {
            line = {{"id", record.id}, {"error", e.what()}};
            err << "error: " << record.id << ": " << e.what() << "\n";
            ++failures;
        }
        out_file << line.dump() << "\n";
    }
    out_file.close();

    write_command_manifest(args.out, "score", args.seed,
                           {{"alpha", args.alpha}, {"phase", args.phase}},
                           {args.tasks, args.traces});
    out << "scored " << (traces.size() - failures) << "/" << traces.size() << " traces\n";
    return failures == 0 ? 0 : 2;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    const TaskIndex tasks = index_tasks(load_tasks_file(args.tasks));
    const std::vector<TraceRecord> traces = load_traces_file(args.traces);
    std::optional<KnowledgeGraph> graph;
    if (!args.graph.empty()) graph = load_graph_file(args.graph);

    std::vector<EvalRecord> records;
    std::size_t skipped = 0;
    for (const auto& record : traces) {
        const auto it = tasks.find(record.id);
        if (it == tasks.end()) {
            err << "error: unknown task id: " << record.id << "\n";
            ++skipped;
            continue;
        }
        const TaskInstance& task = it->second;
        const Trace trace = parse_trace(record.text);
        const AnswerMetrics answer = answer_metrics(trace, task.gold_answers);

        EvalRecord rec;
        rec.id = record.id;
        rec.hit1 = answer.hit1;
        rec.f1 = answer.f1;
        rec.group_labels = task.labels;

        // Exploration counts need gold paths plus a graph to validate the
        // extracted triples against.
        const KnowledgeGraph* validation =
            graph ? &*graph : (task.subgraph ? &*task.subgraph : nullptr);
        if (!task.gold_paths.empty() && validation && trace.think) {
            std::set<Triple> gold_pool;
            for (const auto& path : task.gold_paths) {
                const auto triples = path.triple_set();
                gold_pool.insert(triples.begin(), triples.end());
            }
            const std::set<Triple> extracted =
                extract_tuple_patterns(*trace.think, *validation);
            rec.n_pred_triples = extracted.size();
            rec.n_gold_triples = gold_pool.size();
            for (const auto& t : extracted) {
                if (gold_pool.count(t)) ++rec.n_correct_triples;
            }
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw Error("no scorable traces");

    const GroupedReport report =
        grouped_report(records, args.group_by.empty() ? "" : args.group_by);

    const auto summary_json = [](const MetricSummary& s) {
        json j = {{"hit1_mean", s.hit1_mean},  {"f1_mean", s.f1_mean},
                  {"coverage", s.coverage},    {"n_samples", s.n_samples},
                  {"n_skipped_efficiency", s.n_skipped_efficiency}};
        if (s.efficiency) j["efficiency"] = *s.efficiency;
        return j;
    };

    json out_json = {{"overall", summary_json(report.overall)}};
    const auto print_row = [&](const std::string& name, const MetricSummary& s) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-16s %6zu  %8s %8s %9s %11s %8zu\n", name.c_str(),
                      s.n_samples, fmt4(s.hit1_mean).c_str(), fmt4(s.f1_mean).c_str(),
                      fmt4(s.coverage).c_str(),
                      s.efficiency ? fmt4(*s.efficiency).c_str() : "-",
                      s.n_skipped_efficiency);
        out << buf;
    };

    char header[160];
    std::snprintf(header, sizeof header, "%-16s %6s  %8s %8s %9s %11s %8s\n", "group", "n",
                  "hit@1", "f1", "coverage", "efficiency", "skipped");
    out << header;
    print_row("overall", report.overall);
    if (!args.group_by.empty()) {
        json groups = json::object();
        for (const auto& [label, summary] : report.groups) {
            print_row(args.group_by + "=" + label, summary);
            groups[label] = summary_json(summary);
        }
        out_json["groups"] = groups;
        out_json["group_by"] = args.group_by;
    }
    if (skipped > 0) out_json["unmatched_traces"] = skipped;

    if (!args.out.empty()) {
        std::ofstream out_file(args.out);
        if (!out_file) throw Error("cannot write " + args.out);
        out_file << out_json.dump(2) << "\n";
        std::vector<std::string> inputs = {args.tasks, args.traces};
        if (!args.graph.empty()) inputs.push_back(args.graph);
        write_command_manifest(args.out, "eval", args.seed,
                               {{"group_by", args.group_by}}, inputs);
    }
    return skipped == 0 ? 0 : 2;
}

int cmd_ttest(const TTestArgs& args, std::ostream& out, std::ostream&) {
    const TTestResult r = one_sample_ttest(args.mean, args.sd, args.n, args.baseline);
    char buf[80];
    std::snprintf(buf, sizeof buf, "t = %.4f (df = %zu)\n", r.t, r.df);
    out << buf;
    return 0;
}

int cmd_train_toy(const TrainToyArgs& args, std::ostream& out, std::ostream&) {
    SyntheticTaskFamily family;
    family.seed = args.family_seed;
    family.n_entities = args.n_entities;
    family.n_relations = args.n_relations;
    family.edge_density = args.edge_density;
    family.gold_hops = args.gold_hops;
    family.distractor_branching = args.distractor_branching;
    family.n_tasks = args.n_tasks;

    TrainSchedule schedule;
    schedule.phase1_steps = args.phase1_steps;
    schedule.phase2_steps = args.phase2_steps;
    schedule.group_size = args.group_size;
    schedule.learning_rate = args.learning_rate;
    schedule.alpha = args.alpha;
    schedule.clip_epsilon = args.clip_epsilon;
    schedule.kl_beta = args.kl_beta;
    schedule.inner_epochs = args.inner_epochs;
    schedule.seed = args.seed;

    const TrainReport report = train(schedule, family);

    std::filesystem::create_directories(args.out_dir);
    write_report_csv_file(args.out_dir + "/report.csv", report);
    save_policy_file(args.out_dir + "/policy.json", report.policy);

    // The generated family itself, so the run can be replayed through
    // paths/score/eval.
    const FamilyInstance instance = generate_family(family);
    {
        std::ofstream f(args.out_dir + "/graph.tsv");
        if (!f) throw Error("cannot write graph.tsv");
        save_graph(f, instance.graph, GraphFormat::tsv);
    }
    save_tasks_file(args.out_dir + "/tasks.jsonl", instance.tasks);

    const auto eval_json = [](const MetricSummary& s, double mean_r_outcome) {
        json j = {{"mean_r_outcome", mean_r_outcome},
                  {"hit1_mean", s.hit1_mean},
                  {"f1_mean", s.f1_mean},
                  {"coverage", s.coverage},
                  {"efficiency", s.efficiency ? json(*s.efficiency) : json()},
                  {"n_samples", s.n_samples}};
        return j;
    };
    const json summary = {
        {"initial", eval_json(report.initial_eval, report.initial_mean_r_outcome)},
        {"final", eval_json(report.final_eval, report.final_mean_r_outcome)},
        {"steps", report.steps.size()},
    };
    {
        std::ofstream f(args.out_dir + "/summary.json");
        if (!f) throw Error("cannot write summary.json");
        f << summary.dump(2) << "\n";
    }

    const json config = {{"family",
                          {{"seed", family.seed},
                           {"n_entities", family.n_entities},
                           {"n_relations", family.n_relations},
                           {"edge_density", family.edge_density},
                           {"gold_hops", family.gold_hops},
                           {"distractor_branching", family.distractor_branching},
                           {"n_tasks", family.n_tasks}}},
                         {"schedule",
                          {{"phase1_steps", schedule.phase1_steps},
                           {"phase2_steps", schedule.phase2_steps},
                           {"group_size", schedule.group_size},
                           {"learning_rate", schedule.learning_rate},
                           {"alpha", schedule.alpha},
                           {"clip_epsilon", schedule.clip_epsilon},
                           {"kl_beta", schedule.kl_beta},
                           {"inner_epochs", schedule.inner_epochs}}}};
    write_manifest_file(args.out_dir + "/manifest.json",
                        make_manifest("train-toy", schedule.seed, config, {}));

    out << "initial mean r_outcome " << fmt4(report.initial_mean_r_outcome) << ", final "
        << fmt4(report.final_mean_r_outcome) << "; initial coverage "
        << fmt4(report.initial_eval.coverage) << ", final "
        << fmt4(report.final_eval.coverage) << "\n";
    return 0;
}

namespace {

httplib::Server* g_serving = nullptr;

void handle_stop_signal(int) {
    if (g_serving) g_serving->stop();
}

}  // namespace

int cmd_serve(const ServeArgs& args, std::ostream& out, std::ostream& err) {
    auto state = std::make_shared<ServiceState>();
    state->graph = load_graph_file(args.graph);
    state->tasks = index_tasks(load_tasks_file(args.tasks));
    state->base_config.alpha = args.alpha;
    state->base_config.phase = parse_phase(args.phase);
    state->base_config.validate();

    const auto server = make_server(state);
    g_serving = server.get();
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);

    out << "serving " << state->tasks.size() << " tasks on http://" << args.host << ":"
        << args.port << std::endl;
    if (!server->listen(args.host, args.port)) {
        err << "failed to bind " << args.host << ":" << args.port << "\n";
        g_serving = nullptr;
        return 1;
    }
    g_serving = nullptr;
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Reward machinery for knowledge-graph reasoning"};
    app.require_subcommand(1);
    app.set_config("--config", "", "config file mirroring the flags (TOML)");

    PathsArgs paths;
    auto* paths_cmd = app.add_subcommand("paths", "search and verify gold reasoning paths");
    paths_cmd->add_option("--graph", paths.graph, "graph file (TSV or JSONL)")->required();
    paths_cmd->add_option("--tasks", paths.tasks, "task JSONL")->required();
    paths_cmd->add_option("--out", paths.out, "augmented task JSONL")->required();
    paths_cmd->add_option("--max-hops", paths.max_hops, "path length cap");
    paths_cmd->add_option("--max-paths", paths.max_paths, "candidate path cap");
    paths_cmd->add_flag("--traverse-inverse", paths.traverse_inverse,
                        "also walk edges object to subject");
    paths_cmd->add_flag("--force", paths.force, "rebuild paths even when already present");
    paths_cmd->add_option("--verifier", paths.verifier, "rule | always | llm");
    paths_cmd->add_option("--seed", paths.seed, "recorded in the manifest");

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "reward breakdowns for traces");
    score_cmd->add_option("--tasks", score.tasks, "task JSONL (gold paths filled)")
        ->required();
    score_cmd->add_option("--traces", score.traces, "trace JSONL")->required();
    score_cmd->add_option("--out", score.out, "reward JSONL")->required();
    score_cmd->add_option("--alpha", score.alpha, "path reward coefficient");
    score_cmd->add_option("--phase", score.phase, "outcome_only | joint");
    score_cmd->add_option("--seed", score.seed, "recorded in the manifest");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "answer and exploration metrics");
    // Not ->required(): the nested ttest subcommand takes neither.
    eval_cmd->add_option("--tasks", eval.tasks, "task JSONL");
    eval_cmd->add_option("--traces", eval.traces, "trace JSONL");
    eval_cmd->add_option("--graph", eval.graph, "graph for validating explored triples");
    eval_cmd->add_option("--group-by", eval.group_by, "label key for per-group breakdown");
    eval_cmd->add_option("--out", eval.out, "JSON report path");
    eval_cmd->add_option("--seed", eval.seed, "recorded in the manifest");

    TTestArgs ttest;
    auto* ttest_cmd =
        eval_cmd->add_subcommand("ttest", "one-sample t statistic from run stats");
    ttest_cmd->add_option("--mean", ttest.mean, "model mean over runs")->required();
    ttest_cmd->add_option("--sd", ttest.sd, "model standard deviation")->required();
    ttest_cmd->add_option("--n", ttest.n, "number of runs")->required();
    ttest_cmd->add_option("--baseline", ttest.baseline, "baseline value")->required();

    TrainToyArgs train_args;
    auto* train_cmd = app.add_subcommand("train-toy", "two-phase GRPO on a synthetic family");
    train_cmd->add_option("--out-dir", train_args.out_dir, "output directory")->required();
    train_cmd->add_option("--family-seed", train_args.family_seed, "family generation seed");
    train_cmd->add_option("--n-entities", train_args.n_entities, "entity budget");
    train_cmd->add_option("--n-relations", train_args.n_relations, "relation pool size");
    train_cmd->add_option("--edge-density", train_args.edge_density,
                          "distractor acceptance probability");
    train_cmd->add_option("--gold-hops", train_args.gold_hops, "planted route length");
    train_cmd->add_option("--distractor-branching", train_args.distractor_branching,
                          "distractor candidates per entity");
    train_cmd->add_option("--n-tasks", train_args.n_tasks, "number of tasks");
    train_cmd->add_option("--phase1-steps", train_args.phase1_steps, "outcome-only steps");
    train_cmd->add_option("--phase2-steps", train_args.phase2_steps, "joint steps");
    train_cmd->add_option("--group-size", train_args.group_size, "rollouts per task");
    train_cmd->add_option("--lr", train_args.learning_rate, "gradient-ascent step size");
    train_cmd->add_option("--alpha", train_args.alpha, "path reward coefficient");
    train_cmd->add_option("--clip-epsilon", train_args.clip_epsilon, "ratio clip width");
    train_cmd->add_option("--kl-beta", train_args.kl_beta, "KL penalty weight");
    train_cmd->add_option("--inner-epochs", train_args.inner_epochs,
                          "updates per rollout batch");
    train_cmd->add_option("--seed", train_args.seed, "training seed");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP scoring service");
    serve_cmd->add_option("--graph", serve.graph, "graph file")->required();
    serve_cmd->add_option("--tasks", serve.tasks, "task JSONL")->required();
    serve_cmd->add_option("--host", serve.host, "bind address");
    serve_cmd->add_option("--port", serve.port, "bind port");
    serve_cmd->add_option("--alpha", serve.alpha, "default path reward coefficient");
    serve_cmd->add_option("--phase", serve.phase, "outcome_only | joint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (paths_cmd->parsed()) return cmd_paths(paths, std::cout, std::cerr);
        if (ttest_cmd->parsed()) return cmd_ttest(ttest, std::cout, std::cerr);
        if (eval_cmd->parsed()) {
            if (eval.tasks.empty() || eval.traces.empty())
                throw Error("eval requires --tasks and --traces");
            return cmd_eval(eval, std::cout, std::cerr);
        }
        if (score_cmd->parsed()) return cmd_score(score, std::cout, std::cerr);
        if (train_cmd->parsed()) return cmd_train_toy(train_args, std::cout, std::cerr);
        if (serve_cmd->parsed()) return cmd_serve(serve, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace eog
