#pragma once

#include <compare>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eog {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Directed fact (subject, relation, object). Fields are stored in the
// canonical normalized form; equality is normalized-field equality.
struct Triple {
    std::string subject;
    std::string relation;
    std::string object;

    // Normalizes all three fields; throws Error if any is empty afterwards.
    static Triple make(std::string_view subject, std::string_view relation,
                       std::string_view object);

    auto operator<=>(const Triple&) const = default;
};

enum class Direction { out, in, both };

std::string_view to_string(Direction d);

struct NeighborEdge {
    std::string relation;
    std::string entity;
    Direction direction = Direction::out;

    auto operator<=>(const NeighborEdge&) const = default;
};

// Immutable triple store with entity/relation indices and adjacency in
// both directions. Safe to share across concurrent readers.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Deduplicates and indexes. Inputs may be unnormalized.
    static KnowledgeGraph from_triples(std::vector<Triple> triples);

    const std::vector<Triple>& triples() const { return triples_; }
    const std::set<std::string>& entities() const { return entities_; }
    const std::set<std::string>& relations() const { return relations_; }
    std::size_t size() const { return triples_.size(); }

    bool contains(const Triple& t) const;
    bool has_entity(std::string_view e) const;

    // Adjacency entries for `entity`, sorted by (relation, neighbor) and,
    // for `both`, out-entries before in-entries on ties. Unknown entities
    // yield an empty list.
    std::vector<NeighborEdge> neighbors(std::string_view entity, Direction dir) const;

private:
    std::vector<Triple> triples_;  // sorted, unique
    std::set<std::string> entities_;
    std::set<std::string> relations_;
    std::unordered_map<std::string, std::vector<std::pair<std::string, std::string>>> out_;
    std::unordered_map<std::string, std::vector<std::pair<std::string, std::string>>> in_;
};

enum class GraphFormat { tsv, jsonl };

// One triple per line. TSV: three tab-separated fields; JSONL: objects
// with string keys "s", "r", "o". Blank lines are skipped; any other
// malformed line raises Error with its line number. A file with no
// triples raises "empty graph".
KnowledgeGraph load_graph(std::istream& in, GraphFormat format,
                          const std::string& source_name = "<stream>");
KnowledgeGraph load_graph_file(const std::string& path, GraphFormat format);
// Picks the format from the file extension (.tsv vs anything else -> jsonl).
KnowledgeGraph load_graph_file(const std::string& path);

void save_graph(std::ostream& out, const KnowledgeGraph& g, GraphFormat format);

// One step of a reasoning path. `inverse` marks an edge walked
// object -> subject; source/target are the traversal endpoints.
struct PathStep {
    Triple triple;
    bool inverse = false;

    const std::string& source() const { return inverse ? triple.object : triple.subject; }
    const std::string& target() const { return inverse ? triple.subject : triple.object; }

    auto operator<=>(const PathStep&) const = default;
};

// Chain-connected triple sequence from a start entity to an end entity.
// Invariant: each step's source equals the previous step's target; an
// empty path has start == end.
class ReasoningPath {
public:
    ReasoningPath() = default;

    static ReasoningPath empty_at(std::string_view entity);
    // Validates the chain; throws Error on a broken link.
    static ReasoningPath from_steps(std::vector<PathStep> steps, std::string_view start);
    // Steps given in traversal orientation (source, relation, target), as
    // stored in task files; all steps load as forward.
    static ReasoningPath from_oriented_triples(const std::vector<Triple>& steps);

    const std::vector<PathStep>& steps() const { return steps_; }
    const std::string& start() const { return start_; }
    const std::string& end() const { return end_; }
    std::size_t hops() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }

    // Deduplicated underlying triples (graph orientation).
    std::set<Triple> triple_set() const;

    // "a --[r1]--> b --[r2]--> c"; inverse hops render as "<--[r]--".
    std::string render() const;

    auto operator<=>(const ReasoningPath&) const = default;

private:
    std::vector<PathStep> steps_;
    std::string start_;
    std::string end_;
};

// One question with its topic entities, gold answers, and (possibly
// empty) gold reasoning paths.
struct TaskInstance {
    std::string id;
    std::string question;
    std::vector<std::string> topic_entities;  // normalized, deduplicated
    std::set<std::string> gold_answers;       // normalized labels
    std::vector<ReasoningPath> gold_paths;
    std::optional<KnowledgeGraph> subgraph;
    std::map<std::string, std::string> labels;

    // Enforces: non-empty answers/topics, and every gold path starting at
    // a topic entity and ending at a gold answer.
    void validate() const;
};

std::vector<TaskInstance> load_tasks(std::istream& in,
                                     const std::string& source_name = "<stream>");
std::vector<TaskInstance> load_tasks_file(const std::string& path);
void save_tasks(std::ostream& out, const std::vector<TaskInstance>& tasks);
void save_tasks_file(const std::string& path, const std::vector<TaskInstance>& tasks);

}  // namespace eog
