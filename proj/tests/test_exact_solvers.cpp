#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "pmdp/exact_solvers.hpp"
#include "pmdp/oracle.hpp"
#include "pmdp/problems.hpp"
#include "pmdp/reductions.hpp"

using namespace pmdp;

TEST_CASE("all five solver paths agree on randomized tiny instances",
          "[exact][oracle][property]") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto pmdp = random_tiny_pmdp(seed);
        const Real discount = Real(0.45) + Real(0.01) * Real(seed);
        const auto report = check_solver_agreement(pmdp, discount, 1e-8);
        for (const auto& f : report.failures)
            INFO("seed " << seed << ": " << f);
        REQUIRE(report.passed);
        REQUIRE(report.max_deviation <= 1e-8);
    }
}

TEST_CASE("ex-ante sweeps and factored-MDP sweeps are bit-identical",
          "[exact]") {
    // The factored model's intermediate rows are indicators, so both solvers
    // evaluate the same floating-point expressions in the same order; the
    // iterates must match exactly, not just within tolerance.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pmdp = random_tiny_pmdp(seed);
        const auto direct = exante_value_iteration(pmdp, 0.85, 1e-12, 20000);
        const auto model = factored_from_pmdp(pmdp);
        const auto factored = factored_value_iteration(model, 0.85, 1e-12,
                                                       20000);
        REQUIRE(direct.diag.converged);
        REQUIRE(factored.diag.converged);
        REQUIRE(direct.diag.sweeps == factored.diag.sweeps);
        for (int s = 0; s < pmdp.num_sigma(); ++s)
            REQUIRE(direct.values.values[s] == factored.values.values[s]);
    }
}

TEST_CASE("ex-ante sweep cost is sum over sigma of pairs^d * d", "[exact]") {
    for (std::uint64_t seed : {0ULL, 1ULL, 7ULL}) {
        const auto pmdp = random_tiny_pmdp(seed);
        const auto result = exante_value_iteration(pmdp, 0.6, 1e-10);
        std::uint64_t expected = 0;
        for (int s = 0; s < pmdp.num_sigma(); ++s) {
            const double d = pmdp.draw_count(s);
            expected += static_cast<std::uint64_t>(
                std::pow(static_cast<double>(pmdp.num_pairs()), d) * d);
        }
        REQUIRE(result.sweep_ops == expected);
    }
}

TEST_CASE("factored model validates its kernels on construction", "[exact]") {
    // Two states, one action each; state transitions factor exactly through
    // two intermediate outcomes (indicator intermediate kernel).
    FiniteMdp base(2, {1, 1});
    base.reward(0, 0) = 1.0;
    base.reward(1, 0) = -0.5;
    base.transition(0, 0, 0) = 0.5;
    base.transition(0, 0, 1) = 0.5;
    base.transition(1, 0, 0) = 0.2;
    base.transition(1, 0, 1) = 0.8;
    const std::vector<Real> inter{1, 0, 0, 1};
    const std::vector<Real> emission{0.5, 0.5, 0.2, 0.8};

    REQUIRE_NOTHROW(FactoredMdp(base, 2, inter, emission));

    SECTION("base kernel inconsistent with the factorization") {
        FiniteMdp bad = base;
        bad.transition(0, 0, 0) = 0.6;
        bad.transition(0, 0, 1) = 0.4;
        REQUIRE_THROWS_WITH(FactoredMdp(bad, 2, inter, emission),
                            Catch::Matchers::ContainsSubstring("inconsistent"));
    }
    SECTION("emission row not normalized") {
        REQUIRE_THROWS_WITH(
            FactoredMdp(base, 2, inter, {0.5, 0.4, 0.2, 0.8}),
            Catch::Matchers::ContainsSubstring("sum to 1"));
    }
    SECTION("negative probability") {
        REQUIRE_THROWS_WITH(
            FactoredMdp(base, 2, inter, {1.5, -0.5, 0.2, 0.8}),
            Catch::Matchers::ContainsSubstring("negative"));
    }
    SECTION("kernel size mismatches") {
        REQUIRE_THROWS_WITH(FactoredMdp(base, 2, {1, 0, 0}, emission),
                            Catch::Matchers::ContainsSubstring("size"));
        REQUIRE_THROWS_WITH(FactoredMdp(base, 2, inter, {0.5, 0.5}),
                            Catch::Matchers::ContainsSubstring("size"));
    }
}

TEST_CASE("the embedding composes back to the ex-post kernel", "[exact]") {
    const auto pmdp = random_tiny_pmdp(5);
    const auto model = factored_from_pmdp(pmdp);
    const auto reduction = ex_post_reduction(pmdp, 2000);
    const int n = reduction.mdp.num_states();
    REQUIRE(model.base().num_states() == n);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < reduction.mdp.num_actions(s); ++a) {
            REQUIRE(model.base().reward(s, a) == reduction.mdp.reward(s, a));
            for (int t = 0; t < n; ++t) {
                Real composed = 0;
                for (int sig = 0; sig < pmdp.num_sigma(); ++sig)
                    composed += model.intermediate(s, a, sig) *
                                model.emission(sig, t);
                REQUIRE(composed ==
                        Catch::Approx(reduction.mdp.transition(s, a, t))
                            .margin(1e-12));
            }
        }
    }
}

TEST_CASE("realized-state action extraction matches full policy extraction",
          "[exact]") {
    const auto pmdp = random_tiny_pmdp(11);
    const Real discount = 0.9;
    const auto reduction = ex_post_reduction(pmdp, 2000);
    const auto vi = value_iteration(reduction.mdp, discount, 1e-12, 100000);
    REQUIRE(vi.diag.converged);
    const auto policy = extract_policy(reduction.mdp, vi.values);

    const auto exante = exante_value_iteration(pmdp, discount, 1e-12, 100000);
    REQUIRE(exante.diag.converged);
    const auto& w = exante.values;
    const auto model = factored_from_pmdp(pmdp);

    int checked = 0;
    for (int s = 0; s < reduction.mdp.num_states(); ++s) {
        const auto state = reduction.decode(s, pmdp);

        // The factored-model extraction sees the same scores bit for bit.
        REQUIRE(extract_action_factored(model, w, s) + 1 ==
                extract_action_pmdp(pmdp, w, state));

        // Against the ex-post policy, skip states whose top two draw scores
        // are separated by less than the value-iteration slack.
        std::vector<Real> scores;
        for (std::int64_t a = 1; a <= state.draw_count(); ++a) {
            const auto& out = state.outcome(a);
            scores.push_back(pmdp.reward_value(out.reward_index) -
                             pmdp.cost_at(a) +
                             discount * w.values[out.sigma_to]);
        }
        std::sort(scores.begin(), scores.end(), std::greater<>());
        if (scores.size() > 1 && scores[0] - scores[1] < 1e-9)
            continue;
        REQUIRE(extract_action_pmdp(pmdp, w, state) == policy[s] + 1);
        ++checked;
    }
    REQUIRE(checked > 0);

    // The discount-free overload scores with discount 1.
    RelativeValueVector rel;
    rel.values.assign(static_cast<std::size_t>(pmdp.num_sigma()), 0);
    const auto state0 = reduction.decode(0, pmdp);
    Real best = -1e300;
    std::int64_t expect = 1;
    for (std::int64_t a = 1; a <= state0.draw_count(); ++a) {
        const auto& out = state0.outcome(a);
        const Real q = pmdp.reward_value(out.reward_index) - pmdp.cost_at(a);
        if (q > best) {
            best = q;
            expect = a;
        }
    }
    REQUIRE(extract_action_pmdp(pmdp, rel, state0) == expect);

    // Mismatched value-vector length is rejected.
    ValueVector short_w;
    short_w.values.assign(static_cast<std::size_t>(pmdp.num_sigma()) + 1, 0);
    REQUIRE_THROWS_AS(extract_action_pmdp(pmdp, short_w, state0),
                      std::invalid_argument);
}

TEST_CASE("sigma-space solvers report non-convergence honestly", "[exact]") {
    const auto pmdp = random_tiny_pmdp(2);
    const auto direct = exante_value_iteration(pmdp, 0.9, 1e-9, 1);
    CHECK_FALSE(direct.diag.converged);
    CHECK(direct.diag.sweeps == 1);

    const auto model = factored_from_pmdp(pmdp);
    const auto factored = factored_value_iteration(model, 0.9, 1e-9, 1);
    CHECK_FALSE(factored.diag.converged);

    REQUIRE_THROWS_AS(exante_value_iteration(pmdp, 1.0, 1e-9),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(exante_value_iteration(card_game_pmdp(), 0.9),
                      std::invalid_argument);
}

TEST_CASE("solver cross-check catches a shift inconsistent with the costs",
          "[exact][oracle]") {
    // A doubling shift that does not match the cost structure leaves the
    // dichotomy solver computing a different game; every other path still
    // agrees, so the disagreement pinpoints the dichotomy. The reward spread
    // exceeds the cost step so the wrong shift genuinely moves the maximum.
    std::vector<std::vector<Real>> joint{{0.2, 0.35, 0.15, 0.3},
                                         {0.25, 0.25, 0.3, 0.2}};
    const PseudoMdp bad(
        2, {0.0, 1.0}, joint, {2, 2}, DrawCosts::popcount_form(0.0, 0.3),
        ShiftDescriptor{ShiftDescriptor::Kind::constant, 0.7});
    const auto report = check_solver_agreement(bad, 0.8, 1e-8);
    REQUIRE_FALSE(report.passed);
    bool dichotomy_blamed = false;
    for (const auto& f : report.failures)
        dichotomy_blamed =
            dichotomy_blamed || f.find("dichotomy") != std::string::npos;
    CHECK(dichotomy_blamed);

    // The consistent shift passes.
    const PseudoMdp good(
        2, {0.0, 1.0}, joint, {2, 2}, DrawCosts::popcount_form(0.0, 0.3),
        ShiftDescriptor{ShiftDescriptor::Kind::constant, 0.3});
    CHECK(check_solver_agreement(good, 0.8, 1e-8).passed);
}
