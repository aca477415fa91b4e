#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "pmdp/exact_solvers.hpp"
#include "pmdp/fast_solver.hpp"
#include "pmdp/problems.hpp"

using namespace pmdp;

TEST_CASE("card game structure", "[cards]") {
    const auto cards = card_game_pmdp();
    cards.require_valid();
    REQUIRE(cards.num_sigma() == 4);
    REQUIRE(cards.num_rewards() == 10);
    REQUIRE(cards.num_pairs() == 40);

    for (int sigma = 0; sigma < 4; ++sigma) {
        REQUIRE(cards.draw_count(sigma) == std::exp2(sigma));
        for (int color = 0; color < 4; ++color)
            for (int v = 0; v < 10; ++v)
                REQUIRE(cards.joint(sigma, color, v) ==
                        (v == 9 ? 4.0 : 1.0) / 52.0);
    }
    for (int a = 1; a <= 8; ++a)
        REQUIRE(cards.cost_at(a) == 6.0 + a);

    CHECK(std::strcmp(card_color_name(0), "club") == 0);
    CHECK(std::strcmp(card_color_name(1), "spade") == 0);
    CHECK(std::strcmp(card_color_name(2), "diamond") == 0);
    CHECK(std::strcmp(card_color_name(3), "heart") == 0);
    CHECK(std::strcmp(card_color_name(7), "unknown") == 0);

    REQUIRE(cards.shift().has_value());
    CHECK(cards.shift()->kind == ShiftDescriptor::Kind::linear);
    CHECK(cards.shift()->parameter == 1.0);
}

TEST_CASE("binomial pmf closed forms", "[lra]") {
    CHECK(binomial_pmf(5, 0.3, 2) == Catch::Approx(0.3087).margin(1e-12));
    CHECK(binomial_pmf(5, 0.3, -1) == 0.0);
    CHECK(binomial_pmf(5, 0.3, 6) == 0.0);
    CHECK(binomial_pmf(5, 0.0, 0) == 1.0);
    CHECK(binomial_pmf(5, 0.0, 1) == 0.0);
    CHECK(binomial_pmf(5, 1.0, 5) == 1.0);
    CHECK(binomial_pmf(5, 1.0, 4) == 0.0);
    // Large n stays finite through the log-space form.
    CHECK(binomial_pmf(1000, 0.5, 500) ==
          Catch::Approx(0.0252250181783608).epsilon(1e-10));
}

TEST_CASE("tail-and-total joint law marginalizes to the binomial",
          "[lra][property]") {
    struct Case {
        int kappa;
        double p;
    };
    for (const auto& c : {Case{32, 0.2}, Case{5, 0.37}, Case{1, 0.6}}) {
        const auto joint = lra_joint_distribution(c.kappa, c.p);
        REQUIRE(joint.size() == static_cast<std::size_t>(c.kappa + 1));

        double total = 0;
        for (int n = 0; n <= c.kappa; ++n) {
            double marginal = 0;
            for (int t = 0; t <= c.kappa; ++t)
                marginal += joint[t][n];
            REQUIRE(marginal ==
                    Catch::Approx(binomial_pmf(c.kappa, c.p, n))
                        .margin(1e-12));
            total += marginal;
        }
        REQUIRE(total == Catch::Approx(1.0).margin(1e-12));

        // A full adversary round is the single tail-equals-kappa outcome.
        REQUIRE(joint[c.kappa][c.kappa] ==
                Catch::Approx(std::pow(c.p, c.kappa)).margin(1e-15));

        // The tail cannot exceed the total, and any shorter tail is closed
        // by an honest slot, so n = kappa is impossible for t < kappa.
        for (int t = 0; t < c.kappa; ++t) {
            REQUIRE(joint[t][c.kappa] == 0.0);
            for (int n = 0; n < t; ++n)
                REQUIRE(joint[t][n] == 0.0);
        }
    }

    REQUIRE_THROWS_AS(lra_joint_distribution(0, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_joint_distribution(4, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_joint_distribution(4, 1.0), std::invalid_argument);
}

TEST_CASE("last-revealer chain structure and truncation", "[lra]") {
    const LraSpec spec{8, 0.3, 4};
    const auto pmdp = lra_pmdp(spec);
    pmdp.require_valid();
    REQUIRE(pmdp.num_sigma() == 5);
    REQUIRE(pmdp.num_rewards() == 9);
    for (int sigma = 0; sigma <= 4; ++sigma)
        REQUIRE(pmdp.draw_count(sigma) == std::exp2(sigma));

    // Withholding reveals costs one slot each: popcount of the subset mask.
    REQUIRE(pmdp.cost_at(1) == 0.0);
    REQUIRE(pmdp.cost_at(2) == 1.0);
    REQUIRE(pmdp.cost_at(4) == 2.0);
    REQUIRE(pmdp.cost_at(8) == 3.0);
    REQUIRE(pmdp.shift()->kind == ShiftDescriptor::Kind::constant);
    REQUIRE(pmdp.shift()->parameter == 1.0);

    // Tails longer than sigma_max land on sigma_max, preserving each n's
    // marginal mass (up to the row-sum renormalization).
    const auto full = lra_joint_distribution(8, 0.3);
    for (int n = 0; n <= 8; ++n) {
        double truncated = 0, direct = 0;
        for (int sigma = 0; sigma <= 4; ++sigma)
            truncated += pmdp.joint(0, sigma, n);
        for (int t = 0; t <= 8; ++t)
            direct += full[t][n];
        REQUIRE(truncated == Catch::Approx(direct).margin(1e-12));
    }
    double collapsed = 0;
    for (int t = 4; t <= 8; ++t)
        for (int n = 0; n <= 8; ++n)
            collapsed += full[t][n];
    double at_cap = 0;
    for (int n = 0; n <= 8; ++n)
        at_cap += pmdp.joint(0, 4, n);
    REQUIRE(at_cap == Catch::Approx(collapsed).margin(1e-12));

    // All sigma share one outcome law.
    for (int sigma = 1; sigma <= 4; ++sigma)
        for (int to = 0; to <= 4; ++to)
            for (int n = 0; n <= 8; ++n)
                REQUIRE(pmdp.joint(sigma, to, n) == pmdp.joint(0, to, n));

    REQUIRE_THROWS_AS(lra_pmdp({0, 0.3, -1}), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_pmdp({1024, 0.3, -1}), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_pmdp({8, 0.0, -1}), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_pmdp({8, 1.0, -1}), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_pmdp({8, 0.3, 0}), std::invalid_argument);
    REQUIRE_THROWS_AS(lra_pmdp({8, 0.3, 9}), std::invalid_argument);
}

TEST_CASE("small last-revealer chain: fast solver vs direct enumeration",
          "[lra]") {
    // kappa = 4 truncated to sigma_max = 2 keeps the enumeration feasible:
    // 15 pairs, tuples 15 + 15^2 + 15^4.
    const auto pmdp = lra_pmdp({4, 0.3, 2});
    const Real discount = 0.9;
    const auto direct = exante_value_iteration(pmdp, discount, 1e-11, 100000,
                                               std::size_t(1) << 20);
    REQUIRE(direct.diag.converged);

    FastSolveOptions opt;
    opt.discount = discount;
    opt.epsilon = 1e-11;
    const auto fast = fast_value_iteration(pmdp, opt);
    REQUIRE(fast.diag.converged);
    for (int s = 0; s < pmdp.num_sigma(); ++s)
        REQUIRE(fast.values.values[s] ==
                Catch::Approx(direct.values.values[s]).margin(1e-8));
}

TEST_CASE("the largest supported instance constructs", "[lra]") {
    const auto pmdp = lra_pmdp({512, 0.2, -1});
    pmdp.require_valid();
    REQUIRE(pmdp.num_sigma() == 513);
    REQUIRE(pmdp.draw_count(512) == std::exp2(512));
    REQUIRE(pmdp.cost().distinct_values(pmdp.max_draw_count()).size() == 513);
}

TEST_CASE("gain normalization helpers", "[lra]") {
    CHECK(lra_honest_baseline(32, 0.2) == Catch::Approx(6.4).margin(1e-15));
    CHECK(lra_normalized_gain(6.4, 32, 0.2) == 0.0);
    CHECK(lra_normalized_gain(6.4 + 0.32, 32, 0.2) ==
          Catch::Approx(0.01).margin(1e-12));
    CHECK(lra_normalized_gain(6.0, 32, 0.2) < 0.0);
}
