#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pmdp/exact_solvers.hpp"
#include "pmdp/fast_solver.hpp"
#include "pmdp/pseudo_mdp.hpp"
#include "pmdp/reductions.hpp"
#include "pmdp/utility_distribution.hpp"

namespace pmdp {

/// Randomized pseudo MDP small enough for every solver path including full
/// ex-post enumeration: |Sigma| <= 3, |R| <= 3, power-of-two draw counts
/// with (|Sigma||R|)^max_d <= 300. Even seeds carry a popcount-style cost
/// (constant shift), odd seeds a linear one; joint rows are strictly
/// positive so the chain mixes.
inline PseudoMdp random_tiny_pmdp(std::uint64_t seed) {
    std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto pick = [&](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(gen);
    };
    const auto real = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    };

    const int num_sigma = pick(1, 3);
    const int num_rewards = pick(1, 3);
    const int pairs = num_sigma * num_rewards;
    // Largest power-of-two d with pairs^d <= 300.
    int max_d = 1;
    while (max_d * 2 <= 4 && std::pow(pairs, max_d * 2) <= 300.0)
        max_d *= 2;

    std::vector<Real> rewards(static_cast<std::size_t>(num_rewards));
    Real level = real(-2, 0);
    for (auto& r : rewards) {
        r = level;
        level += real(0.05, 1.5); // keep reward values well separated
    }

    std::vector<std::vector<Real>> joint;
    joint.reserve(static_cast<std::size_t>(num_sigma));
    for (int s = 0; s < num_sigma; ++s) {
        std::vector<Real> row(static_cast<std::size_t>(pairs));
        Real sum = 0;
        for (auto& p : row) {
            p = real(0.05, 1.0);
            sum += p;
        }
        for (auto& p : row)
            p /= sum;
        joint.push_back(std::move(row));
    }

    std::vector<double> draws(static_cast<std::size_t>(num_sigma));
    for (auto& d : draws)
        d = static_cast<double>(1 << pick(0, static_cast<int>(
                                                 std::log2(max_d))));

    const bool constant_shift = seed % 2 == 0;
    DrawCosts cost = DrawCosts::table({});
    ShiftDescriptor shift;
    if (constant_shift) {
        const Real base = real(-1, 1);
        const Real step = real(-0.5, 1.5);
        cost = DrawCosts::popcount_form(base, step);
        shift = {ShiftDescriptor::Kind::constant, step};
    } else {
        const Real c0 = real(-1, 1);
        const Real c1 = real(-0.75, 1.25);
        cost = DrawCosts::linear(c0, c1);
        shift = {ShiftDescriptor::Kind::linear, c1};
    }
    return PseudoMdp(num_sigma, std::move(rewards), std::move(joint),
                     std::move(draws), std::move(cost), shift);
}

struct OracleReport {
    bool passed = true;
    std::vector<std::string> failures;
    Real max_deviation = 0;
    std::vector<Real> w_expost;  // VI on the full ex-post reduction
    std::vector<Real> w_exante;  // direct ex-ante sweeps
    std::vector<Real> w_factored; // factored-MDP sweeps on the embedding
    std::vector<Real> w_naive;   // utility-distribution sweeps by enumeration
    std::vector<Real> w_fast;    // dichotomy solver
};

namespace detail {

inline void compare_path(OracleReport& report, const char* name,
                         const std::vector<Real>& reference,
                         const std::vector<Real>& candidate, Real tolerance) {
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const Real dev = std::abs(reference[i] - candidate[i]);
        report.max_deviation = std::max(report.max_deviation, dev);
        if (dev > tolerance) {
            report.passed = false;
            report.failures.push_back(
                std::string(name) + " deviates at sigma " +
                std::to_string(i) + " by " + std::to_string(dev));
        }
    }
}

} // namespace detail

/// Runs every solver path on one instance and checks they agree on the
/// ex-ante values within the tolerance: value iteration over the
/// materialized ex-post reduction (averaged back through the outcome
/// distribution), direct ex-ante sweeps, the factored-MDP sweep schedule on
/// the embedding, per-sweep utility-distribution enumeration, and the
/// dichotomy solver. Also cross-checks the dichotomy cdf against brute
/// force at the converged values.
inline OracleReport check_solver_agreement(const PseudoMdp& pmdp,
                                           Real discount,
                                           Real tolerance = 1e-8) {
    OracleReport report;
    constexpr Real kEps = 1e-12;
    constexpr int kMaxIters = 100000;

    // Reference: ex-post reduction solved as a plain MDP, averaged onto the
    // ex-ante states through the outcome-tuple distribution.
    const auto reduction = ex_post_reduction(pmdp, 2000);
    const auto vi = value_iteration(reduction.mdp, discount, kEps, kMaxIters);
    if (!vi.diag.converged) {
        report.passed = false;
        report.failures.push_back("ex-post value iteration did not converge");
        return report;
    }
    report.w_expost.assign(static_cast<std::size_t>(pmdp.num_sigma()), 0);
    for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma) {
        const auto group = detail::enumerate_sigma_group(pmdp, sigma, 2000);
        const std::size_t offset =
            reduction.group_offset[static_cast<std::size_t>(
                reduction.group_of_draw_count(
                    static_cast<int>(pmdp.draw_count(sigma))))];
        Real acc = 0;
        for (std::size_t t = 0; t < group.count; ++t)
            acc += group.prob[t] * vi.values.values[offset + t];
        report.w_expost[static_cast<std::size_t>(sigma)] = acc;
    }

    const auto exante = exante_value_iteration(pmdp, discount, kEps, kMaxIters);
    if (!exante.diag.converged) {
        report.passed = false;
        report.failures.push_back("ex-ante value iteration did not converge");
    }
    report.w_exante = exante.values.values;
    detail::compare_path(report, "ex-ante sweep", report.w_expost,
                         report.w_exante, tolerance);

    const auto model = factored_from_pmdp(pmdp, 2000);
    const auto factored = factored_value_iteration(model, discount, kEps,
                                                   kMaxIters);
    if (!factored.diag.converged) {
        report.passed = false;
        report.failures.push_back("factored value iteration did not converge");
    }
    report.w_factored = factored.values.values;
    detail::compare_path(report, "factored sweep", report.w_expost,
                         report.w_factored, tolerance);

    // Utility-distribution fixed point by brute-force enumeration per sweep.
    {
        std::vector<Real> w(static_cast<std::size_t>(pmdp.num_sigma()), 0);
        bool converged = false;
        for (int sweep = 0; sweep < kMaxIters; ++sweep) {
            std::vector<Real> next(w.size());
            for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma)
                next[static_cast<std::size_t>(sigma)] =
                    naive_utility_distribution(pmdp, w, discount, sigma, 2000)
                        .expectation(sigma);
            Real residual = 0;
            for (std::size_t i = 0; i < w.size(); ++i)
                residual = std::max(residual, std::abs(next[i] - w[i]));
            w = std::move(next);
            if (residual <= kEps) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            report.passed = false;
            report.failures.push_back(
                "enumeration-based utility iteration did not converge");
        }
        report.w_naive = w;
        detail::compare_path(report, "utility enumeration", report.w_expost,
                             report.w_naive, tolerance);
    }

    FastSolveOptions opt;
    opt.discount = discount;
    opt.epsilon = kEps;
    opt.max_iters = kMaxIters;
    const auto fast = fast_value_iteration(pmdp, opt);
    if (!fast.diag.converged) {
        report.passed = false;
        report.failures.push_back("dichotomy value iteration did not converge");
    }
    report.w_fast = fast.values.values;
    detail::compare_path(report, "dichotomy solver", report.w_expost,
                         report.w_fast, tolerance);

    // Dichotomy cdf vs brute force at the converged values, every sigma.
    {
        const auto single = single_draw_cdf(pmdp, report.w_fast, discount);
        for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma) {
            const auto fast_cdf = dichotomy_cdf(single, pmdp, sigma);
            const auto brute = naive_utility_distribution(
                pmdp, report.w_fast, discount, sigma, 2000);
            const auto& a = fast_cdf.cdf[sigma];
            const auto& b = brute.cdf[sigma];
            if (a.size() != b.size()) {
                report.passed = false;
                report.failures.push_back("cdf grids disagree in size");
                continue;
            }
            for (std::size_t j = 0; j < a.size(); ++j) {
                const Real dev = std::abs(a[j] - b[j]);
                report.max_deviation = std::max(report.max_deviation, dev);
                if (dev > tolerance) {
                    report.passed = false;
                    report.failures.push_back(
                        "dichotomy cdf deviates at sigma " +
                        std::to_string(sigma) + ", grid point " +
                        std::to_string(j) + " by " + std::to_string(dev));
                    break;
                }
            }
        }
    }
    return report;
}

} // namespace pmdp
