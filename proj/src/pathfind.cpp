#include "eog/pathfind.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "eog/norm.hpp"

namespace eog {

void SearchConfig::validate() const {
    if (max_hops < 1) throw Error("max_hops must be >= 1");
    if (max_paths < 1) throw Error("max_paths must be >= 1");
}

namespace {

struct Frontier {
    std::string start;
    std::string entity;
    std::vector<PathStep> steps;
    std::set<std::string> visited;
};

}  // namespace

SearchResult search_paths(const KnowledgeGraph& g,
                          const std::vector<std::string>& topic_entities,
                          const std::set<std::string>& answers, const SearchConfig& config) {
    config.validate();
    SearchResult result;
    const auto capped = [&] { return result.paths.size() >= config.max_paths; };

    std::deque<Frontier> queue;
    std::set<std::string> seeded;
    for (const auto& raw_topic : topic_entities) {
        const std::string topic = normalize(raw_topic);
        if (topic.empty() || !seeded.insert(topic).second) continue;
        if (answers.count(topic)) {
            if (capped()) {
                result.truncated = true;
                return result;
            }
            result.paths.push_back(ReasoningPath::empty_at(topic));
        }
        if (g.has_entity(topic)) queue.push_back({topic, topic, {}, {topic}});
    }

    const Direction dir = config.traverse_inverse ? Direction::both : Direction::out;
    while (!queue.empty()) {
        Frontier cur = std::move(queue.front());
        queue.pop_front();
        for (const auto& edge : g.neighbors(cur.entity, dir)) {
            if (config.simple_paths_only && cur.visited.count(edge.entity)) continue;
            std::vector<PathStep> steps = cur.steps;
            const bool inverse = edge.direction == Direction::in;
            steps.push_back({inverse ? Triple{edge.entity, edge.relation, cur.entity}
                                     : Triple{cur.entity, edge.relation, edge.entity},
                             inverse});
            if (answers.count(edge.entity)) {
                if (capped()) {
                    result.truncated = true;
                    return result;
                }
                result.paths.push_back(ReasoningPath::from_steps(steps, cur.start));
            }
            if (steps.size() < config.max_hops) {
                Frontier next{cur.start, edge.entity, std::move(steps), cur.visited};
                next.visited.insert(edge.entity);
                queue.push_back(std::move(next));
            }
        }
    }
    return result;
}

Verification AlwaysVerifier::verify(const std::string&, const ReasoningPath&) {
    return {true, "accept-all policy"};
}

Verification KeywordOverlapVerifier::verify(const std::string& question,
                                            const ReasoningPath& path) {
    static const std::set<std::string> stopwords = {
        "a",  "an",  "and", "are", "at", "by",  "did", "do",  "does", "for", "from",
        "in", "is",  "it",  "of",  "on", "or",  "the", "to",  "was",  "were", "what",
        "when", "where", "which", "who", "whom", "whose", "why", "how"};

    if (path.empty()) return {true, "empty path, topic is the answer"};

    std::set<std::string> question_words;
    for (auto& w : split_words(normalize(question))) {
        if (!stopwords.count(w)) question_words.insert(std::move(w));
    }
    for (const auto& step : path.steps()) {
        for (const auto& w : split_words(normalize(step.triple.relation))) {
            if (question_words.count(w)) {
                return {true, "relation word \"" + w + "\" appears in the question"};
            }
        }
    }
    return {false, "no relation word shared with the question"};
}

std::vector<VerifiedPath> verify_paths(Verifier& verifier, const std::string& question,
                                       const std::vector<ReasoningPath>& candidates,
                                       const VerifyOptions& options) {
    const std::string question_key = normalize(question);

    // Deduplicate verifier work while preserving candidate order.
    std::vector<std::string> keys;
    keys.reserve(candidates.size());
    std::map<std::string, std::vector<std::size_t>> owners;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        keys.push_back(candidates[i].render());
        owners[keys.back()].push_back(i);
    }

    std::map<std::string, Verification> cache;
    std::optional<std::pair<std::size_t, std::string>> failure;
    std::mutex mu;

    const auto run_one = [&](const std::string& key, std::size_t index) {
        Verification v;
        try {
            v = verifier.verify(question_key, candidates[index]);
        } catch (const std::exception& e) {
            std::lock_guard lock(mu);
            if (!failure || index < failure->first) failure = {index, e.what()};
            return;
        }
        std::lock_guard lock(mu);
        cache.emplace(key, std::move(v));
    };

    std::vector<std::pair<std::string, std::size_t>> work;
    for (const auto& [key, idx] : owners) work.emplace_back(key, idx.front());

    if (options.max_parallel <= 1 || work.size() <= 1) {
        for (const auto& [key, index] : work) {
            run_one(key, index);
            if (failure) break;
        }
    } else {
        std::size_t cursor = 0;
        std::mutex cursor_mu;
        const std::size_t n_threads = std::min(options.max_parallel, work.size());
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i;
                    {
                        std::lock_guard lock(cursor_mu);
                        if (cursor >= work.size()) return;
                        i = cursor++;
                    }
                    run_one(work[i].first, work[i].second);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    if (failure) {
        throw Error("verifier failed on candidate " + std::to_string(failure->first) + ": " +
                    failure->second);
    }

    std::vector<VerifiedPath> accepted;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& verdict = cache.at(keys[i]);
        if (verdict.accepted) accepted.push_back({candidates[i], verdict});
    }
    return accepted;
}

GoldPathReport build_gold_paths(std::vector<TaskInstance>& tasks, const KnowledgeGraph& graph,
                                Verifier& verifier, const SearchConfig& config, bool force) {
    config.validate();
    GoldPathReport report;
    for (auto& task : tasks) {
        if (!task.gold_paths.empty() && !force) {
            ++report.tasks_skipped;
            continue;
        }
        const KnowledgeGraph& g = task.subgraph ? *task.subgraph : graph;

        // Answers must name entities the graph knows about; a task whose
        // answers are all absent can never be grounded.
        std::vector<std::string> absent;
        for (const auto& a : task.gold_answers) {
            if (!g.has_entity(a)) absent.push_back(a);
        }
        if (absent.size() == task.gold_answers.size()) {
            std::string joined;
            for (const auto& a : absent) {
                if (!joined.empty()) joined += ", ";
                joined += a;
            }
            throw Error("task " + task.id + ": no answer entity present in graph (" +
                        joined + ")");
        }
        for (const auto& a : absent) {
            report.warnings.push_back("task " + task.id + ": answer not in graph: " + a);
        }

        SearchResult found = search_paths(g, task.topic_entities, task.gold_answers, config);
        if (found.truncated) {
            report.warnings.push_back("task " + task.id + ": path cap reached, candidates truncated");
        }
        std::vector<ReasoningPath> kept;
        for (auto& vp : verify_paths(verifier, task.question, found.paths)) {
            kept.push_back(std::move(vp.path));
        }
        std::set<std::string> reached;
        for (const auto& p : kept) reached.insert(p.end());
        for (const auto& a : task.gold_answers) {
            if (!reached.count(a)) {
                ++report.answers_missing;
                report.warnings.push_back("task " + task.id + ": no verified path to answer " + a);
            }
        }
        task.gold_paths = std::move(kept);
        ++report.tasks_updated;
    }
    return report;
}

}  // namespace eog
