#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eog/kg.hpp"

namespace eog {

struct SearchConfig {
    std::size_t max_hops = 4;         // >= 1
    bool traverse_inverse = false;    // also walk edges object -> subject
    std::size_t max_paths = 256;      // >= 1; cap on emitted paths
    bool simple_paths_only = true;    // reject repeated entities within a path

    void validate() const;
};

struct SearchResult {
    std::vector<ReasoningPath> paths;  // shortest first, deterministic order
    bool truncated = false;            // hit the max_paths cap
};

// Enumerates paths from any topic entity to any answer entity, breadth
// first so shorter paths come out earlier. Expansion order is fixed by
// the (relation, neighbor) sort of KnowledgeGraph::neighbors, so equal
// inputs give byte-equal output. A topic that is itself an answer yields
// the empty path at that entity.
SearchResult search_paths(const KnowledgeGraph& g,
                          const std::vector<std::string>& topic_entities,
                          const std::set<std::string>& answers,
                          const SearchConfig& config = {});

struct Verification {
    bool accepted = false;
    std::string rationale;
};

// Decides whether a candidate path is a plausible reasoning chain for a
// question. Implementations must be deterministic for a fixed
// (question, path) pair; verify_paths caches on that key.
class Verifier {
  public:
    virtual ~Verifier() = default;
    virtual Verification verify(const std::string& question, const ReasoningPath& path) = 0;
};

// Accepts everything. Useful as a baseline and in tests.
class AlwaysVerifier : public Verifier {
  public:
    Verification verify(const std::string& question, const ReasoningPath& path) override;
};

// Accepts a path when the question and the path's relation names share at
// least one content word. Empty paths are accepted as trivially grounded.
class KeywordOverlapVerifier : public Verifier {
  public:
    Verification verify(const std::string& question, const ReasoningPath& path) override;
};

struct VerifyOptions {
    std::size_t max_parallel = 1;  // > 1 runs verifier calls on a small thread pool
};

struct VerifiedPath {
    ReasoningPath path;
    Verification verdict;
};

// Runs the verifier over candidates in order and keeps the accepted ones.
// Order is preserved. Results are cached per (question, rendered path), so
// duplicate candidates cost one verifier call. A verifier exception is
// rethrown with the index of the failing candidate attached.
std::vector<VerifiedPath> verify_paths(Verifier& verifier, const std::string& question,
                                       const std::vector<ReasoningPath>& candidates,
                                       const VerifyOptions& options = {});

struct GoldPathReport {
    std::size_t tasks_updated = 0;
    std::size_t tasks_skipped = 0;   // already had gold paths and force was off
    std::size_t answers_missing = 0;  // answers with no path found
    std::vector<std::string> warnings;
};

// Searches each task's subgraph (or the shared graph when the task has
// none) and fills task.gold_paths with verified paths. Tasks that already
// have gold paths are left alone unless force is set. Throws when none of
// a task's answers exist in the graph; unreachable or partially covered
// answers are warnings.
GoldPathReport build_gold_paths(std::vector<TaskInstance>& tasks, const KnowledgeGraph& graph,
                                Verifier& verifier, const SearchConfig& config = {},
                                bool force = false);

}  // namespace eog
