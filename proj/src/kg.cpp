#include "eog/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eog/norm.hpp"

namespace eog {

using nlohmann::json;

Triple Triple::make(std::string_view subject, std::string_view relation,
                    std::string_view object) {
    Triple t{normalize(subject), normalize(relation), normalize(object)};
    if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
        throw Error("triple has an empty field after normalization");
    }
    return t;
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::out: return "out";
        case Direction::in: return "in";
        case Direction::both: return "both";
    }
    return "?";
}

KnowledgeGraph KnowledgeGraph::from_triples(std::vector<Triple> triples) {
    KnowledgeGraph g;
    for (auto& t : triples) {
        t = Triple::make(t.subject, t.relation, t.object);
    }
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    for (const auto& t : triples) {
        g.entities_.insert(t.subject);
        g.entities_.insert(t.object);
        g.relations_.insert(t.relation);
        g.out_[t.subject].emplace_back(t.relation, t.object);
        g.in_[t.object].emplace_back(t.relation, t.subject);
    }
    for (auto* adj : {&g.out_, &g.in_}) {
        for (auto& [_, edges] : *adj) {
            std::sort(edges.begin(), edges.end());
        }
    }
    g.triples_ = std::move(triples);
    return g;
}

bool KnowledgeGraph::contains(const Triple& t) const {
    Triple key = Triple::make(t.subject, t.relation, t.object);
    return std::binary_search(triples_.begin(), triples_.end(), key);
}

bool KnowledgeGraph::has_entity(std::string_view e) const {
    return entities_.count(normalize(e)) > 0;
}

std::vector<NeighborEdge> KnowledgeGraph::neighbors(std::string_view entity,
                                                    Direction dir) const {
    const std::string key = normalize(entity);
    std::vector<NeighborEdge> result;
    auto append = [&](const auto& adj, Direction d) {
        auto it = adj.find(key);
        if (it == adj.end()) return;
        for (const auto& [rel, other] : it->second) {
            result.push_back({rel, other, d});
        }
    };
    if (dir == Direction::out || dir == Direction::both) append(out_, Direction::out);
    if (dir == Direction::in || dir == Direction::both) append(in_, Direction::in);
    if (dir == Direction::both) {
        std::sort(result.begin(), result.end(),
                  [](const NeighborEdge& a, const NeighborEdge& b) {
                      return std::tie(a.relation, a.entity, a.direction) <
                             std::tie(b.relation, b.entity, b.direction);
                  });
    }
    return result;
}

namespace {

std::string at_line(const std::string& source, std::size_t line_no) {
    return source + ":" + std::to_string(line_no);
}

Triple triple_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("s") || !j.contains("r") || !j.contains("o") ||
        !j["s"].is_string() || !j["r"].is_string() || !j["o"].is_string()) {
        throw Error(where + ": expected an object with string keys \"s\", \"r\", \"o\"");
    }
    return Triple::make(j["s"].get<std::string>(), j["r"].get<std::string>(),
                        j["o"].get<std::string>());
}

Triple triple_from_array(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_string() || !j[1].is_string() ||
        !j[2].is_string()) {
        throw Error(where + ": expected a [s, r, o] string triple");
    }
    return Triple::make(j[0].get<std::string>(), j[1].get<std::string>(),
                        j[2].get<std::string>());
}

}  // namespace

KnowledgeGraph load_graph(std::istream& in, GraphFormat format,
                          const std::string& source_name) {
    std::vector<Triple> triples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        if (format == GraphFormat::tsv) {
            std::vector<std::string> fields;
            std::size_t pos = 0;
            while (true) {
                std::size_t tab = line.find('\t', pos);
                fields.push_back(line.substr(pos, tab == std::string::npos
                                                      ? std::string::npos
                                                      : tab - pos));
                if (tab == std::string::npos) break;
                pos = tab + 1;
            }
            if (fields.size() != 3) {
                throw Error(at_line(source_name, line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
            }
            try {
                triples.push_back(Triple::make(fields[0], fields[1], fields[2]));
            } catch (const Error& e) {
                throw Error(at_line(source_name, line_no) + ": " + e.what());
            }
        } else {
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                throw Error(at_line(source_name, line_no) + ": invalid JSON");
            }
            try {
                triples.push_back(triple_from_json(j, ""));
            } catch (const Error& e) {
                throw Error(at_line(source_name, line_no) + e.what());
            }
        }
    }
    if (triples.empty()) {
        throw Error(source_name + ": empty graph");
    }
    return KnowledgeGraph::from_triples(std::move(triples));
}

KnowledgeGraph load_graph_file(const std::string& path, GraphFormat format) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file: " + path);
    return load_graph(in, format, path);
}

KnowledgeGraph load_graph_file(const std::string& path) {
    GraphFormat format = path.size() >= 4 && path.substr(path.size() - 4) == ".tsv"
                             ? GraphFormat::tsv
                             : GraphFormat::jsonl;
    return load_graph_file(path, format);
}

void save_graph(std::ostream& out, const KnowledgeGraph& g, GraphFormat format) {
    for (const auto& t : g.triples()) {
        if (format == GraphFormat::tsv) {
            out << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
        } else {
            json j{{"s", t.subject}, {"r", t.relation}, {"o", t.object}};
            out << j.dump() << '\n';
        }
    }
}

ReasoningPath ReasoningPath::empty_at(std::string_view entity) {
    ReasoningPath p;
    p.start_ = normalize(entity);
    p.end_ = p.start_;
    if (p.start_.empty()) throw Error("empty path requires a non-empty entity");
    return p;
}

ReasoningPath ReasoningPath::from_steps(std::vector<PathStep> steps,
                                        std::string_view start) {
    ReasoningPath p;
    p.start_ = normalize(start);
    std::string cur = p.start_;
    for (const auto& step : steps) {
        if (step.source() != cur) {
            throw Error("broken path chain: step source '" + step.source() +
                        "' does not follow '" + cur + "'");
        }
        cur = step.target();
    }
    p.end_ = cur;
    p.steps_ = std::move(steps);
    return p;
}

ReasoningPath ReasoningPath::from_oriented_triples(const std::vector<Triple>& triples) {
    if (triples.empty()) throw Error("oriented triple list is empty");
    std::vector<PathStep> steps;
    steps.reserve(triples.size());
    for (const auto& t : triples) steps.push_back({t, false});
    return from_steps(std::move(steps), triples.front().subject);
}

std::set<Triple> ReasoningPath::triple_set() const {
    std::set<Triple> out;
    for (const auto& s : steps_) out.insert(s.triple);
    return out;
}

std::string ReasoningPath::render() const {
    std::string out = start_;
    for (const auto& s : steps_) {
        out += s.inverse ? " <--[" : " --[";
        out += s.triple.relation;
        out += s.inverse ? "]-- " : "]--> ";
        out += s.target();
    }
    return out;
}

void TaskInstance::validate() const {
    if (gold_answers.empty()) throw Error("task '" + id + "': gold answer set is empty");
    if (topic_entities.empty()) throw Error("task '" + id + "': topic entity list is empty");
    for (const auto& p : gold_paths) {
        bool starts_ok =
            std::find(topic_entities.begin(), topic_entities.end(), p.start()) !=
            topic_entities.end();
        if (!starts_ok) {
            throw Error("task '" + id + "': gold path starts at '" + p.start() +
                        "', which is not a topic entity");
        }
        if (gold_answers.count(p.end()) == 0) {
            throw Error("task '" + id + "': gold path ends at '" + p.end() +
                        "', which is not a gold answer");
        }
    }
}

namespace {

TaskInstance task_from_json(const json& j, const std::string& where) {
    auto require = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw Error(where + ": missing key \"" + key + "\"");
        return j[key];
    };
    TaskInstance task;
    task.id = require("id").get<std::string>();
    task.question = require("question").get<std::string>();
    for (const auto& e : require("topic_entities")) {
        std::string norm = normalize(e.get<std::string>());
        if (norm.empty()) throw Error(where + ": empty topic entity");
        if (std::find(task.topic_entities.begin(), task.topic_entities.end(), norm) ==
            task.topic_entities.end()) {
            task.topic_entities.push_back(norm);
        }
    }
    for (const auto& a : require("answers")) {
        std::string norm = normalize(a.get<std::string>());
        if (!norm.empty()) task.gold_answers.insert(norm);
    }
    if (j.contains("gold_paths")) {
        for (const auto& path_json : j["gold_paths"]) {
            if (!path_json.is_array()) throw Error(where + ": gold path is not an array");
            if (path_json.empty()) {
                // An empty path carries no endpoints of its own; it is only
                // meaningful when some topic entity is itself an answer.
                auto it = std::find_if(task.topic_entities.begin(), task.topic_entities.end(),
                                       [&](const std::string& t) {
                                           return task.gold_answers.count(t) > 0;
                                       });
                if (it == task.topic_entities.end()) {
                    throw Error(where + ": empty gold path but no topic entity is an answer");
                }
                task.gold_paths.push_back(ReasoningPath::empty_at(*it));
                continue;
            }
            std::vector<Triple> triples;
            for (const auto& t : path_json) triples.push_back(triple_from_array(t, where));
            try {
                task.gold_paths.push_back(ReasoningPath::from_oriented_triples(triples));
            } catch (const Error& e) {
                throw Error(where + ": " + e.what());
            }
        }
    }
    if (j.contains("subgraph")) {
        std::vector<Triple> triples;
        for (const auto& t : j["subgraph"]) triples.push_back(triple_from_array(t, where));
        task.subgraph = KnowledgeGraph::from_triples(std::move(triples));
    }
    if (j.contains("labels")) {
        for (const auto& [key, value] : j["labels"].items()) {
            task.labels[key] = value.is_string() ? value.get<std::string>() : value.dump();
        }
    }
    try {
        task.validate();
    } catch (const Error& e) {
        throw Error(where + ": " + e.what());
    }
    return task;
}

json task_to_json(const TaskInstance& task) {
    json j;
    j["id"] = task.id;
    j["question"] = task.question;
    j["topic_entities"] = task.topic_entities;
    j["answers"] = json::array();
    for (const auto& a : task.gold_answers) j["answers"].push_back(a);
    if (!task.gold_paths.empty()) {
        json paths = json::array();
        for (const auto& p : task.gold_paths) {
            json steps = json::array();
            // Steps are written in traversal orientation so the chain reads
            // left to right; the inverse flag is not persisted.
            for (const auto& s : p.steps()) {
                steps.push_back(json::array({s.source(), s.triple.relation, s.target()}));
            }
            paths.push_back(std::move(steps));
        }
        j["gold_paths"] = std::move(paths);
    }
    if (task.subgraph) {
        json triples = json::array();
        for (const auto& t : task.subgraph->triples()) {
            triples.push_back(json::array({t.subject, t.relation, t.object}));
        }
        j["subgraph"] = std::move(triples);
    }
    if (!task.labels.empty()) j["labels"] = task.labels;
    return j;
}

}  // namespace

std::vector<TaskInstance> load_tasks(std::istream& in, const std::string& source_name) {
    std::vector<TaskInstance> tasks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(at_line(source_name, line_no) + ": invalid JSON");
        }
        try {
            tasks.push_back(task_from_json(j, at_line(source_name, line_no)));
        } catch (const json::exception& e) {
            throw Error(at_line(source_name, line_no) + ": " + e.what());
        }
    }
    return tasks;
}

std::vector<TaskInstance> load_tasks_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open task file: " + path);
    return load_tasks(in, path);
}

void save_tasks(std::ostream& out, const std::vector<TaskInstance>& tasks) {
    for (const auto& t : tasks) out << task_to_json(t).dump() << '\n';
}

void save_tasks_file(const std::string& path, const std::vector<TaskInstance>& tasks) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open task file for writing: " + path);
    save_tasks(out, tasks);
}

}  // namespace eog
