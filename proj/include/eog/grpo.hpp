#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eog/kg.hpp"

namespace eog {

// One rollout of a group: reward plus per-token log-probabilities under
// the current, behavior, and reference policies. The three vectors must
// be the same length and non-empty.
struct GroupSample {
    double reward = 0.0;
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;

    void validate() const;
};

struct GrpoConfig {
    double clip_epsilon = 0.2;  // in (0, 1)
    double kl_beta = 0.0;       // >= 0; 0 disables the KL term
    double std_floor = 1e-8;    // guards the advantage denominator

    void validate() const;
};

struct GrpoReport {
    double objective = 0.0;  // maximized
    std::vector<double> advantages;
    double mean_ratio = 0.0;     // flat mean of importance ratios over all tokens
    double mean_kl = 0.0;        // flat mean of per-token k3 estimates
    double clip_fraction = 0.0;  // tokens where clipping bit, over all tokens
};

// Group-relative advantages: (r - mean) / max(population std, std_floor).
// Throws "group too small" for fewer than two samples.
std::vector<double> group_advantages(const std::vector<double>& rewards, double std_floor);

// k3 estimator of KL(new || ref) at one token:
// exp(d) - d - 1 with d = logp_ref - logp_new. Always >= 0.
double token_kl(double logp_new, double logp_ref);

// Clipped surrogate objective over the group, token-mean within each
// sample then mean over samples, minus kl_beta times the same nesting of
// the k3 KL estimate.
GrpoReport grpo_objective(const std::vector<GroupSample>& group, const GrpoConfig& config);

// Same objective plus d objective / d logp_new for every token, laid out
// per sample. Gradients treat the advantages as constants.
GrpoReport grpo_objective_with_grad(const std::vector<GroupSample>& group,
                                    const GrpoConfig& config,
                                    std::vector<std::vector<double>>& grad_logp_new);

// JSONL dump of groups: each line holds arrays "reward", "logp_new",
// "logp_old", "logp_ref" indexed by sample.
std::vector<std::vector<GroupSample>> load_group_dump(std::istream& in,
                                                      const std::string& source_name =
                                                          "<stream>");
std::vector<std::vector<GroupSample>> load_group_dump_file(const std::string& path);

}  // namespace eog
