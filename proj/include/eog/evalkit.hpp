#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eog/kg.hpp"
#include "eog/trace.hpp"

namespace eog {

// One scored question. Answer metrics are stored precomputed; the triple
// counts feed the exploration metrics. group_labels carries free-form
// breakdown keys such as hops=2 or pattern=superlative.
struct EvalRecord {
    std::string id;
    bool hit1 = false;
    double f1 = 0.0;
    std::size_t n_pred_triples = 0;
    std::size_t n_correct_triples = 0;
    std::size_t n_gold_triples = 0;
    std::map<std::string, std::string> group_labels;

    // Enforces n_correct <= min(n_pred, n_gold).
    void validate() const;
};

struct MetricSummary {
    double hit1_mean = 0.0;
    double f1_mean = 0.0;
    std::optional<double> efficiency;  // absent when no record had a correct triple
    double coverage = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_skipped_efficiency = 0;  // records the efficiency mean skipped
};

struct AnswerMetrics {
    bool hit1 = false;  // any overlap between predicted and gold
    double f1 = 0.0;
};

// Hit@1 as nonempty overlap plus entity-level F1 (same arithmetic as
// outcome_reward). Throws on an empty gold set.
AnswerMetrics answer_metrics(const std::set<std::string>& predicted,
                             const std::set<std::string>& gold);
AnswerMetrics answer_metrics(const Trace& trace, const std::set<std::string>& gold);

// Aggregates a batch where every record carries exploration counts:
// efficiency = mean of n_pred/n_correct over records with n_correct > 0
// (the rest are skipped and counted), coverage = mean of n_correct/n_gold
// over all records. Requires n_gold_triples > 0 on every record and a
// non-empty list.
MetricSummary exploration_metrics(const std::vector<EvalRecord>& records);

// Tolerant variant for mixed batches: answer means over all records,
// exploration means over the subset with n_gold_triples > 0.
MetricSummary summarize(const std::vector<EvalRecord>& records);

struct GroupedReport {
    MetricSummary overall;
    std::map<std::string, MetricSummary> groups;
};

// Splits records on the value of group_labels[group_key] ("unlabeled"
// when the key is missing) and summarizes each group plus the whole.
GroupedReport grouped_report(const std::vector<EvalRecord>& records,
                             const std::string& group_key);

struct TTestResult {
    double t = 0.0;
    std::size_t df = 0;
};

// One-sample t statistic from run statistics: t = (mean - baseline) /
// (sd / sqrt(n)), df = n - 1. Needs n >= 2 and sd > 0.
TTestResult one_sample_ttest(double model_mean, double model_sd, std::size_t n_runs,
                             double baseline);
// Convenience over raw per-run values (sample standard deviation).
TTestResult one_sample_ttest(const std::vector<double>& samples, double baseline);

}  // namespace eog
