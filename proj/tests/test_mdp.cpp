#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pmdp/mdp.hpp"
#include "test_helpers.hpp"

using namespace pmdp;

namespace {

/// Two-state chain with a closed-form optimum at discount 0.9:
/// state 0 chooses stay (reward 1) or switch to state 1 (reward 0);
/// state 1 absorbs with reward 2. V*(1) = 20, V*(0) = 0.9 * 20 = 18.
FiniteMdp two_state_example() {
    FiniteMdp mdp(2, {2, 1});
    mdp.reward(0, 0) = 1;
    mdp.transition(0, 0, 0) = 1;
    mdp.reward(0, 1) = 0;
    mdp.transition(0, 1, 1) = 1;
    mdp.reward(1, 0) = 2;
    mdp.transition(1, 0, 1) = 1;
    return mdp;
}

} // namespace

TEST_CASE("finite MDP validation reports structural defects", "[mdp]") {
    FiniteMdp mdp(2, {1, 1});
    mdp.transition(0, 0, 0) = 0.5; // row sums to 0.5
    mdp.transition(1, 0, 0) = 1.0;
    REQUIRE_FALSE(mdp.validate().empty());
    REQUIRE_THROWS_AS(mdp.require_valid(), std::invalid_argument);

    mdp.transition(0, 0, 1) = 0.5;
    REQUIRE(mdp.validate().empty());

    mdp.transition(1, 0, 0) = 1.5;
    mdp.transition(1, 0, 1) = -0.5; // negative entry, row still sums to 1
    REQUIRE_FALSE(mdp.validate().empty());

    mdp.transition(1, 0, 0) = 1.0;
    mdp.transition(1, 0, 1) = 0.0;
    mdp.reward(1, 0) = std::numeric_limits<Real>::infinity();
    REQUIRE_FALSE(mdp.validate().empty());
}

TEST_CASE("value iteration reaches the closed-form optimum", "[mdp]") {
    const auto mdp = two_state_example();
    const auto res = value_iteration(mdp, 0.9, 1e-12, 100000);
    REQUIRE(res.diag.converged);
    CHECK(res.values.values[0] == Catch::Approx(18.0).margin(1e-9));
    CHECK(res.values.values[1] == Catch::Approx(20.0).margin(1e-9));

    const auto policy = extract_policy(mdp, res.values);
    CHECK(policy[0] == 1);
    CHECK(policy[1] == 0);
}

TEST_CASE("bellman sweep matches a hand computation", "[mdp]") {
    const auto mdp = two_state_example();
    std::vector<Real> w{10, 4};
    const auto next = bellman_sweep(mdp, w, 0.5);
    // state 0: max(1 + 0.5*10, 0 + 0.5*4) = 6; state 1: 2 + 0.5*4 = 4.
    CHECK(next[0] == Catch::Approx(6.0).margin(0));
    CHECK(next[1] == Catch::Approx(4.0).margin(0));
}

TEST_CASE("value iteration agrees with policy enumeration", "[mdp][property]") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto mdp = testutil::random_mdp(seed);
        const Real discount = 0.5 + 0.017 * static_cast<Real>(seed);
        const auto res = value_iteration(mdp, discount, 1e-13, 200000);
        REQUIRE(res.diag.converged);
        const auto oracle =
            testutil::optimal_values_by_enumeration(mdp, discount);
        for (int s = 0; s < mdp.num_states(); ++s)
            REQUIRE(res.values.values[s] ==
                    Catch::Approx(oracle[s]).margin(1e-8));
    }
}

TEST_CASE("bellman operator is a discount-factor contraction",
          "[mdp][property]") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unit(-5.0, 5.0);
    for (std::uint64_t seed = 100; seed < 115; ++seed) {
        const auto mdp = testutil::random_mdp(seed);
        const Real discount = 0.3 + 0.04 * static_cast<Real>(seed % 16);
        std::vector<Real> v(mdp.num_states()), u(mdp.num_states());
        for (int s = 0; s < mdp.num_states(); ++s) {
            v[s] = unit(gen);
            u[s] = unit(gen);
        }
        const auto tv = bellman_sweep(mdp, v, discount);
        const auto tu = bellman_sweep(mdp, u, discount);
        Real lhs = 0, rhs = 0;
        for (int s = 0; s < mdp.num_states(); ++s) {
            lhs = std::max(lhs, std::abs(tv[s] - tu[s]));
            rhs = std::max(rhs, std::abs(v[s] - u[s]));
        }
        REQUIRE(lhs <= discount * rhs + 1e-12);
    }
}

TEST_CASE("greedy policy ties resolve to the lowest action index", "[mdp]") {
    FiniteMdp mdp(2, {3, 1});
    // Actions 1 and 2 are identical and better than action 0.
    mdp.reward(0, 0) = 0;
    mdp.transition(0, 0, 0) = 1;
    mdp.reward(0, 1) = 1;
    mdp.transition(0, 1, 1) = 1;
    mdp.reward(0, 2) = 1;
    mdp.transition(0, 2, 1) = 1;
    mdp.reward(1, 0) = 0;
    mdp.transition(1, 0, 1) = 1;
    const auto res = value_iteration(mdp, 0.5);
    REQUIRE(res.diag.converged);
    CHECK(extract_policy(mdp, res.values)[0] == 1);
}

TEST_CASE("value iteration rejects invalid discounts and flags timeouts",
          "[mdp]") {
    const auto mdp = two_state_example();
    REQUIRE_THROWS_AS(value_iteration(mdp, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(value_iteration(mdp, -0.1), std::invalid_argument);
    const auto res = value_iteration(mdp, 0.9, 1e-12, 3);
    CHECK_FALSE(res.diag.converged);
    CHECK(res.diag.sweeps == 3);
    CHECK(res.diag.residual > 1e-12);
}

TEST_CASE("relative iteration solves the periodic alternating chain",
          "[mdp][relative]") {
    // Deterministic 2-cycle paying 1 on one edge: gain 1/2, and the plain
    // recentred operator oscillates, so the damped update must converge.
    FiniteMdp mdp(2, {1, 1});
    mdp.reward(0, 0) = 1;
    mdp.transition(0, 0, 1) = 1;
    mdp.reward(1, 0) = 0;
    mdp.transition(1, 0, 0) = 1;

    const auto res = relative_value_iteration(mdp, 0, 1e-10, 10000);
    REQUIRE(res.diag.converged);
    CHECK(res.values.values[0] == 0.0);
    CHECK(res.values.values[1] == Catch::Approx(-0.5).margin(1e-8));
    CHECK(res.values.gain == Catch::Approx(0.5).margin(1e-8));
    CHECK(res.values.reference == 0);
}

TEST_CASE("relative iteration recovers the stationary average reward",
          "[mdp][relative][property]") {
    for (std::uint64_t seed = 40; seed < 52; ++seed) {
        const auto mdp = testutil::random_mdp(seed, 5, 1); // single action
        const auto res = relative_value_iteration(mdp, 0, 1e-11, 200000);
        REQUIRE(res.diag.converged);
        CHECK(res.values.values[0] == 0.0);

        // Stationary distribution of the (single) policy by power iteration.
        const int n = mdp.num_states();
        std::vector<Real> pi(n, Real(1) / n), next(n);
        for (int iter = 0; iter < 200000; ++iter) {
            std::fill(next.begin(), next.end(), Real(0));
            for (int s = 0; s < n; ++s) {
                const Real* row = mdp.transition_row(s, 0);
                for (int to = 0; to < n; ++to)
                    next[to] += pi[s] * row[to];
            }
            Real delta = 0;
            for (int s = 0; s < n; ++s)
                delta = std::max(delta, std::abs(next[s] - pi[s]));
            pi = next;
            if (delta < 1e-14)
                break;
        }
        Real average = 0;
        for (int s = 0; s < n; ++s)
            average += pi[s] * mdp.reward(s, 0);
        CHECK(res.values.gain == Catch::Approx(average).margin(1e-7));
    }
}

TEST_CASE("relative policy extraction scores with undiscounted values",
          "[mdp][relative]") {
    FiniteMdp mdp(2, {2, 1});
    mdp.reward(0, 0) = 0.4;
    mdp.transition(0, 0, 0) = 1;
    mdp.reward(0, 1) = 0;
    mdp.transition(0, 1, 1) = 1;
    mdp.reward(1, 0) = 1;
    mdp.transition(1, 0, 1) = 1;
    const auto res = relative_value_iteration(mdp, 0, 1e-10, 10000);
    REQUIRE(res.diag.converged);
    // Staying at state 1 pays 1 per step, so state 0 should switch.
    CHECK(extract_policy(mdp, res.values)[0] == 1);
    CHECK(res.values.gain == Catch::Approx(1.0).margin(1e-8));
}
