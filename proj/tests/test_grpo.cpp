#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "eog/grpo.hpp"
#include "oracles.hpp"

using namespace eog;

namespace {

GroupSample sample(double reward, std::vector<double> lp_new, std::vector<double> lp_old,
                   std::vector<double> lp_ref) {
    GroupSample s;
    s.reward = reward;
    s.logp_new = std::move(lp_new);
    s.logp_old = std::move(lp_old);
    s.logp_ref = std::move(lp_ref);
    return s;
}

std::vector<GroupSample> random_group(std::mt19937_64& rng, std::size_t n_samples) {
    std::uniform_real_distribution<double> logp(-2.5, -0.1);
    std::uniform_real_distribution<double> reward(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> tokens(1, 5);
    std::vector<GroupSample> group(n_samples);
    for (auto& s : group) {
        s.reward = reward(rng);
        const std::size_t n = tokens(rng);
        for (std::size_t t = 0; t < n; ++t) {
            s.logp_new.push_back(logp(rng));
            s.logp_old.push_back(logp(rng));
            s.logp_ref.push_back(logp(rng));
        }
    }
    return group;
}

}  // namespace

TEST_CASE("advantages normalize rewards within the group") {
    const auto two = group_advantages({1.0, 0.0}, 1e-8);
    CHECK(two[0] == 1.0);
    CHECK(two[1] == -1.0);

    const auto three = group_advantages({1.0, 0.5, 0.0}, 1e-8);
    CHECK(three[0] == doctest::Approx(std::sqrt(6.0) / 2.0));
    CHECK(three[1] == doctest::Approx(0.0));
    CHECK(three[2] == doctest::Approx(-std::sqrt(6.0) / 2.0));
}

TEST_CASE("equal rewards hit the std floor instead of dividing by zero") {
    const auto adv = group_advantages({0.5, 0.5, 0.5}, 1e-8);
    for (double a : adv) CHECK(a == 0.0);
}

TEST_CASE("advantages have zero mean and unit population variance") {
    std::mt19937_64 rng(314159);
    std::uniform_real_distribution<double> reward(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> rewards;
        for (int i = 0; i < 2 + trial % 7; ++i) rewards.push_back(reward(rng));
        const auto adv = group_advantages(rewards, 1e-8);
        double mean = 0.0, var = 0.0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(adv.size());
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(adv.size());
        CHECK(std::fabs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0));
    }
}

TEST_CASE("groups of fewer than two samples are rejected") {
    CHECK_THROWS_AS(group_advantages({}, 1e-8), Error);
    CHECK_THROWS_AS(group_advantages({1.0}, 1e-8), Error);
    GrpoConfig cfg;
    std::vector<GroupSample> one{sample(1.0, {-0.5}, {-0.5}, {-0.5})};
    CHECK_THROWS_AS(grpo_objective(one, cfg), Error);
}

TEST_CASE("token_kl is the k3 estimator and never negative") {
    // d = log 2: exp(d) - d - 1 = 1 - log 2.
    CHECK(token_kl(-std::log(2.0), 0.0) == doctest::Approx(1.0 - std::log(2.0)));
    // d = -log 2: 0.5 + log 2 - 1.
    CHECK(token_kl(0.0, -std::log(2.0)) == doctest::Approx(std::log(2.0) - 0.5));
    CHECK(token_kl(-1.3, -1.3) == 0.0);

    std::mt19937_64 rng(271828);
    std::uniform_real_distribution<double> logp(-4.0, 0.0);
    for (int i = 0; i < 1000; ++i) {
        CHECK(token_kl(logp(rng), logp(rng)) >= 0.0);
    }
}

TEST_CASE("identical policies give a zero objective and clean telemetry") {
    const std::vector<double> lp{-0.4, -1.1, -0.2};
    const std::vector<GroupSample> group{
        sample(1.0, lp, lp, lp),
        sample(0.0, lp, lp, lp),
    };
    GrpoConfig cfg;
    cfg.kl_beta = 0.3;
    const GrpoReport r = grpo_objective(group, cfg);
    // Advantages are +1/-1, ratios all 1, so the surrogate means cancel.
    CHECK(r.objective == doctest::Approx(0.0));
    CHECK(r.mean_ratio == doctest::Approx(1.0));
    CHECK(r.mean_kl == 0.0);
    CHECK(r.clip_fraction == 0.0);
    CHECK(r.advantages[0] == 1.0);
    CHECK(r.advantages[1] == -1.0);
}

TEST_CASE("clipping caps the payoff from large ratio moves") {
    // Ratio 1.5 with advantage +1 clips at 1.2; ratio 0.5 with advantage
    // -1 clips at 0.8. Both tokens count as clipped.
    const std::vector<GroupSample> group{
        sample(1.0, {std::log(0.6)}, {std::log(0.4)}, {std::log(0.6)}),
        sample(0.0, {std::log(0.3)}, {std::log(0.6)}, {std::log(0.3)}),
    };
    GrpoConfig cfg;
    cfg.clip_epsilon = 0.2;
    const GrpoReport r = grpo_objective(group, cfg);
    CHECK(r.objective == doctest::Approx((1.2 - 0.8) / 2.0));
    CHECK(r.clip_fraction == 1.0);
    CHECK(r.mean_ratio == doctest::Approx(1.0));

    // With a wider clip window nothing clips and the raw ratios pay out.
    GrpoConfig wide;
    wide.clip_epsilon = 0.9;
    const GrpoReport w = grpo_objective(group, wide);
    CHECK(w.objective == doctest::Approx((1.5 - 0.5) / 2.0));
    CHECK(w.clip_fraction == 0.0);
}

TEST_CASE("a ratio move against the advantage is never clipped away") {
    // Advantage +1 but the ratio fell to 0.5: min keeps the unclipped
    // term, so the penalty passes through in full.
    const std::vector<GroupSample> group{
        sample(1.0, {std::log(0.3)}, {std::log(0.6)}, {std::log(0.3)}),
        sample(0.0, {std::log(0.6)}, {std::log(0.4)}, {std::log(0.6)}),
    };
    GrpoConfig cfg;
    cfg.clip_epsilon = 0.2;
    const GrpoReport r = grpo_objective(group, cfg);
    // Sample 1: 0.5 * (+1) = 0.5. Sample 2: min(1.5 * -1, 0.8 * -1) = -1.5.
    CHECK(r.objective == doctest::Approx((0.5 - 1.5) / 2.0));
    CHECK(r.clip_fraction == 0.0);
}

TEST_CASE("kl penalty subtracts from the surrogate") {
    const std::vector<double> lp_new{-0.5};
    const std::vector<double> lp_ref{-0.5 + std::log(0.5)};  // d = log 0.5
    const std::vector<GroupSample> group{
        sample(1.0, lp_new, lp_new, lp_ref),
        sample(0.0, lp_new, lp_new, lp_new),
    };
    GrpoConfig cfg;
    cfg.kl_beta = 2.0;
    const GrpoReport r = grpo_objective(group, cfg);
    const double k = std::log(2.0) - 0.5;  // token_kl at d = -log 2
    // Surrogate part cancels (+1 - 1 at ratio 1); KL bites only sample 1.
    CHECK(r.objective == doctest::Approx(-cfg.kl_beta * k / 2.0));
    CHECK(r.mean_kl == doctest::Approx(k / 2.0));
}

TEST_CASE("mean_ratio and mean_kl are flat means over tokens") {
    // One 1-token sample with ratio 2 next to a 3-token sample at ratio 1:
    // flat mean is 5/4, not the nested 3/2.
    const double ln2 = std::log(2.0);
    const std::vector<GroupSample> group{
        sample(0.5, {-0.3}, {-0.3 - ln2}, {-0.3 - ln2}),
        sample(0.5, {-1.0, -1.0, -1.0}, {-1.0, -1.0, -1.0}, {-1.0, -1.0, -1.0}),
    };
    GrpoConfig cfg;
    const GrpoReport r = grpo_objective(group, cfg);
    CHECK(r.mean_ratio == doctest::Approx(1.25));
    const double k = token_kl(-0.3, -0.3 - ln2);
    CHECK(r.mean_kl == doctest::Approx(k / 4.0));
}

TEST_CASE("equal rewards yield a zero surrogate and zero gradient") {
    std::mt19937_64 rng(5551212);
    auto group = random_group(rng, 4);
    for (auto& s : group) s.reward = 0.25;
    GrpoConfig cfg;
    cfg.kl_beta = 0.0;
    std::vector<std::vector<double>> grad;
    const GrpoReport r = grpo_objective_with_grad(group, cfg, grad);
    CHECK(r.objective == 0.0);
    for (const auto& per_sample : grad) {
        for (double g : per_sample) CHECK(g == 0.0);
    }
}

TEST_CASE("objective is invariant to reward shift and positive scaling") {
    std::mt19937_64 rng(8675309);
    const auto group = random_group(rng, 5);
    GrpoConfig cfg;
    cfg.kl_beta = 0.1;
    const double base = grpo_objective(group, cfg).objective;

    auto shifted = group;
    for (auto& s : shifted) s.reward += 3.7;
    CHECK(grpo_objective(shifted, cfg).objective == doctest::Approx(base).epsilon(1e-9));

    // Scaling by a power of two keeps the normalized advantages bit-equal.
    auto scaled = group;
    for (auto& s : scaled) s.reward *= 4.0;
    CHECK(grpo_objective(scaled, cfg).objective == base);
}

TEST_CASE("with_grad reports the same objective as the plain evaluation") {
    std::mt19937_64 rng(424243);
    const auto group = random_group(rng, 4);
    GrpoConfig cfg;
    cfg.kl_beta = 0.05;
    std::vector<std::vector<double>> grad;
    const GrpoReport a = grpo_objective(group, cfg);
    const GrpoReport b = grpo_objective_with_grad(group, cfg, grad);
    CHECK(a.objective == b.objective);
    CHECK(a.mean_kl == b.mean_kl);
    CHECK(a.clip_fraction == b.clip_fraction);
    REQUIRE(grad.size() == group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
        CHECK(grad[i].size() == group[i].logp_new.size());
    }
}

TEST_CASE("analytic gradient matches central differences") {
    // Seeds are fixed so no probe lands on the clip kink; the ratios drawn
    // from [-2.4, 2.4] log-space exercise both clip branches.
    const double h = 1e-5;
    std::mt19937_64 rng(90210);

    for (const auto& [eps, beta] : std::vector<std::pair<double, double>>{
             {0.2, 0.0}, {0.2, 0.05}, {0.1, 0.7}}) {
        GrpoConfig cfg;
        cfg.clip_epsilon = eps;
        cfg.kl_beta = beta;
        for (int trial = 0; trial < 8; ++trial) {
            const auto group = random_group(rng, 4);
            std::vector<std::vector<double>> grad;
            grpo_objective_with_grad(group, cfg, grad);

            for (std::size_t i = 0; i < group.size(); ++i) {
                for (std::size_t t = 0; t < group[i].logp_new.size(); ++t) {
                    auto plus = group;
                    auto minus = group;
                    plus[i].logp_new[t] += h;
                    minus[i].logp_new[t] -= h;
                    const double fd = (grpo_objective(plus, cfg).objective -
                                       grpo_objective(minus, cfg).objective) /
                                      (2.0 * h);
                    if (std::fabs(grad[i][t]) < 1e-9 && std::fabs(fd) < 1e-9) continue;
                    CHECK(testing::rel_err(grad[i][t], fd) < 1e-4);
                }
            }
        }
    }
}

TEST_CASE("sample validation rejects malformed log-prob vectors") {
    CHECK_THROWS_AS(sample(1.0, {}, {}, {}).validate(), Error);
    CHECK_THROWS_AS(sample(1.0, {-1.0}, {-1.0, -2.0}, {-1.0}).validate(), Error);
    CHECK_THROWS_AS(sample(1.0, {0.5}, {-1.0}, {-1.0}).validate(), Error);
    CHECK_NOTHROW(sample(1.0, {0.0}, {-1.0}, {-1.0}).validate());

    GrpoConfig cfg;
    cfg.clip_epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.clip_epsilon = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.clip_epsilon = 0.2;
    cfg.kl_beta = -0.1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.kl_beta = 0.0;
    cfg.std_floor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("group dumps round-trip through the JSONL loader") {
    const std::string line =
        R"({"reward":[1.0,0.0],"logp_new":[[-0.5,-0.7],[-1.0]],)"
        R"("logp_old":[[-0.5,-0.6],[-0.9]],"logp_ref":[[-0.4,-0.7],[-1.1]]})";
    std::istringstream in(line + "\n\n" + line + "\n");
    const auto groups = load_group_dump(in, "dump");
    REQUIRE(groups.size() == 2);  // the blank line is skipped
    REQUIRE(groups[0].size() == 2);
    CHECK(groups[0][0].reward == 1.0);
    CHECK(groups[0][0].logp_new == std::vector<double>{-0.5, -0.7});
    CHECK(groups[0][1].logp_ref == std::vector<double>{-1.1});

    GrpoConfig cfg;
    CHECK_NOTHROW(grpo_objective(groups[0], cfg));
}

TEST_CASE("group dump loader rejects malformed lines with their position") {
    const auto expect_error = [](const std::string& body, const std::string& needle) {
        std::istringstream in(body);
        try {
            load_group_dump(in, "dump");
            FAIL(("expected Error for: " + body));
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_error("not json\n", "dump:1");
    expect_error(R"({"logp_new":[[-1]],"logp_old":[[-1]],"logp_ref":[[-1]]})", "reward");
    expect_error(R"({"reward":1,"logp_new":[[-1]],"logp_old":[[-1]],"logp_ref":[[-1]]})",
                 "array");
    expect_error(R"({"reward":[1,0],"logp_new":[[-1]],"logp_old":[[-1]],"logp_ref":[[-1]]})",
                 "logp_new");
    expect_error(R"({"reward":[1],"logp_new":[["x"]],"logp_old":[[-1]],"logp_ref":[[-1]]})",
                 "non-numeric");
    // Position points at the offending line, not the first.
    const std::string good =
        R"({"reward":[1,0],"logp_new":[[-1],[-1]],"logp_old":[[-1],[-1]],"logp_ref":[[-1],[-1]]})";
    expect_error(good + "\n" + "broken\n", "dump:2");

    CHECK_THROWS_AS(load_group_dump_file("/nonexistent/dump.jsonl"), Error);
}
