#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "pmdp/exact_solvers.hpp"
#include "pmdp/fast_solver.hpp"
#include "pmdp/monte_carlo.hpp"
#include "pmdp/oracle.hpp"
#include "pmdp/problems.hpp"

using namespace pmdp;

namespace {

/// Fluctuation scale of the Monte Carlo iterate: the final sweep's sample
/// mean carries its own standard error, and the value fed into it wobbles
/// with the accumulated noise of earlier sweeps, geometrically damped by
/// the discount. Treating sweeps as an AR(1) chain gives sigma_eff =
/// se / sqrt(1 - discount^2).
Real effective_sigma(Real se, Real discount) {
    return se / std::sqrt(Real(1) - discount * discount);
}

} // namespace

TEST_CASE("sampled value iteration tracks the exact values", "[mcvi]") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto pmdp = random_tiny_pmdp(seed);
        const Real discount = 0.8;
        const auto exact =
            exante_value_iteration(pmdp, discount, 1e-11, 100000);
        REQUIRE(exact.diag.converged);

        const auto sampled = mcvi(pmdp, discount, 5000, 60, seed + 10);
        REQUIRE(sampled.sweeps == 60);
        for (int s = 0; s < pmdp.num_sigma(); ++s) {
            const Real dev = std::abs(sampled.values.values[s] -
                                      exact.values.values[s]);
            const Real sigma_eff =
                effective_sigma(sampled.std_error[s], discount);
            INFO("seed " << seed << " sigma " << s << " dev " << dev
                         << " sigma_eff " << sigma_eff);
            CHECK(dev <= std::max(Real(1e-3), 3 * sigma_eff));
        }
    }
}

TEST_CASE("factored-model sampling agrees with the direct sampler",
          "[mcvi]") {
    const auto pmdp = random_tiny_pmdp(4);
    const Real discount = 0.8;
    const auto exact = exante_value_iteration(pmdp, discount, 1e-11, 100000);
    const auto model = factored_from_pmdp(pmdp);
    const auto sampled = mcvi(model, discount, 5000, 60, 99);
    for (int s = 0; s < pmdp.num_sigma(); ++s) {
        const Real dev =
            std::abs(sampled.values.values[s] - exact.values.values[s]);
        CHECK(dev <=
              std::max(Real(1e-3),
                       3 * effective_sigma(sampled.std_error[s], discount)));
    }
}

TEST_CASE("sampling is deterministic per seed", "[mcvi]") {
    const auto pmdp = random_tiny_pmdp(6);
    const auto a = mcvi(pmdp, 0.7, 200, 10, 123);
    const auto b = mcvi(pmdp, 0.7, 200, 10, 123);
    const auto c = mcvi(pmdp, 0.7, 200, 10, 124);
    REQUIRE(a.values.values == b.values.values);
    REQUIRE(a.values.values != c.values.values);

    REQUIRE_THROWS_AS(mcvi(pmdp, 0.7, 0, 10, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(mcvi(pmdp, 0.7, 10, 0, 1), std::invalid_argument);

    // Draw counts beyond 2^31 cannot be sampled exhaustively per sweep.
    std::vector<std::vector<Real>> joint{{0.3, 0.7}};
    const PseudoMdp huge(1, {0.0, 1.0}, joint, {std::exp2(40)},
                         DrawCosts::popcount_form(0.0, 0.1),
                         ShiftDescriptor{ShiftDescriptor::Kind::constant,
                                         0.1});
    REQUIRE_THROWS_WITH(mcvi(huge, 0.7, 10, 1, 1),
                        Catch::Matchers::ContainsSubstring("too large"));
}

TEST_CASE("sampled card-game values stay within three sigma of exact",
          "[mcvi][cards][property]") {
    const auto cards = card_game_pmdp();
    const Real discount = 0.95;
    // Tuple enumeration is out of reach for eight draws, so the exact
    // reference comes from the distribution-doubling solver.
    FastSolveOptions opt;
    opt.discount = discount;
    opt.epsilon = 1e-11;
    opt.max_iters = 100000;
    const auto exact = fast_value_iteration(cards, opt);
    REQUIRE(exact.diag.converged);

    const auto sampled = mcvi(cards, discount, 2000, 200, 7);
    for (int s = 0; s < 4; ++s) {
        const Real dev =
            std::abs(sampled.values.values[s] - exact.values.values[s]);
        const Real sigma_eff =
            effective_sigma(sampled.std_error[s], discount);
        INFO("sigma " << s << " dev " << dev << " 3*sigma_eff "
                      << 3 * sigma_eff);
        CHECK(dev <= 3 * sigma_eff);
    }
}

TEST_CASE("honest play earns the baseline on the last-revealer chain",
          "[simulate]") {
    const auto pmdp = lra_pmdp({8, 0.3, -1});
    SimulationOptions opt;
    opt.steps = 150000;
    opt.seed = 11;
    const auto honest =
        simulate_strategy(pmdp, SelectionRule::honest, {}, opt);
    REQUIRE(honest.steps == opt.steps);

    const double baseline = lra_honest_baseline(8, 0.3);
    INFO("mean " << honest.mean_reward << " baseline " << baseline
                 << " se " << honest.std_error);
    CHECK(std::abs(honest.mean_reward - baseline) <=
          4 * honest.std_error);

    double occ = 0;
    for (double o : honest.occupancy)
        occ += o;
    CHECK(occ == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("strategy ordering: optimal >= myopic >= honest", "[simulate]") {
    const auto pmdp = lra_pmdp({8, 0.3, -1});
    FastSolveOptions sopt;
    sopt.relative = true;
    const auto solved = fast_value_iteration(pmdp, sopt);
    REQUIRE(solved.diag.converged);

    SimulationOptions opt;
    opt.steps = 150000;
    opt.seed = 21; // same seed across rules: common random numbers
    const auto optimal = simulate_strategy(
        pmdp, SelectionRule::optimal, solved.relative_values.values, opt);
    const auto myopic =
        simulate_strategy(pmdp, SelectionRule::myopic, {}, opt);
    const auto honest =
        simulate_strategy(pmdp, SelectionRule::honest, {}, opt);
    const auto control =
        simulate_strategy(pmdp, SelectionRule::control_max, {}, opt);

    const double slack_om =
        3 * std::hypot(optimal.std_error, myopic.std_error);
    const double slack_mh =
        3 * std::hypot(myopic.std_error, honest.std_error);
    INFO("optimal " << optimal.mean_reward << " myopic "
                    << myopic.mean_reward << " honest "
                    << honest.mean_reward << " control "
                    << control.mean_reward);
    CHECK(optimal.mean_reward >= myopic.mean_reward - slack_om);
    CHECK(myopic.mean_reward >= honest.mean_reward - slack_mh);
    CHECK(optimal.mean_reward > honest.mean_reward);

    // Maximizing control visits high-manipulation states more often than
    // honest play does.
    double control_mass = 0, honest_mass = 0;
    for (std::size_t s = 4; s < control.occupancy.size(); ++s) {
        control_mass += control.occupancy[s];
        honest_mass += honest.occupancy[s];
    }
    CHECK(control_mass > honest_mass);
}

TEST_CASE("capping the per-epoch draws reduces every rule to one draw",
          "[simulate]") {
    const auto pmdp = lra_pmdp({8, 0.3, -1});
    FastSolveOptions sopt;
    sopt.relative = true;
    const auto solved = fast_value_iteration(pmdp, sopt);

    SimulationOptions opt;
    opt.steps = 20000;
    opt.seed = 5;
    opt.sigma_cap = 0; // min(d, 2^0) = 1 draw everywhere
    const auto optimal = simulate_strategy(
        pmdp, SelectionRule::optimal, solved.relative_values.values, opt);
    const auto honest =
        simulate_strategy(pmdp, SelectionRule::honest, {}, opt);
    REQUIRE(optimal.mean_reward == honest.mean_reward);
    REQUIRE(optimal.occupancy == honest.occupancy);
}

TEST_CASE("simulation rejects inconsistent setups", "[simulate]") {
    const auto cards = card_game_pmdp();
    const auto lra = lra_pmdp({8, 0.3, -1});

    // The card game charges for every draw, so "honest" is meaningless.
    REQUIRE_THROWS_WITH(
        simulate_strategy(cards, SelectionRule::honest, {}, {}),
        Catch::Matchers::ContainsSubstring("c(1)"));

    REQUIRE_THROWS_WITH(
        simulate_strategy(lra, SelectionRule::optimal, {0.0, 1.0}, {}),
        Catch::Matchers::ContainsSubstring("value per sigma"));

    SimulationOptions opt;
    opt.steps = 0;
    REQUIRE_THROWS_AS(simulate_strategy(lra, SelectionRule::honest, {}, opt),
                      std::invalid_argument);
    opt = {};
    opt.sigma_cap = 31;
    REQUIRE_THROWS_AS(simulate_strategy(lra, SelectionRule::honest, {}, opt),
                      std::invalid_argument);
    opt = {};
    opt.start_sigma = 9;
    REQUIRE_THROWS_AS(simulate_strategy(lra, SelectionRule::honest, {}, opt),
                      std::invalid_argument);
}
