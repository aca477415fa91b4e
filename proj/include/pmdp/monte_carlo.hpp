#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmdp/exact_solvers.hpp"
#include "pmdp/mdp.hpp"
#include "pmdp/pseudo_mdp.hpp"
#include "pmdp/rng.hpp"

namespace pmdp {

struct McviResult {
    ValueVector values;          // over the ex-ante states
    std::vector<Real> std_error; // per sigma, from the final sweep's samples
    int sweeps = 0;
};

/// Monte Carlo value iteration on the ex-ante states: each sweep replaces
/// W(sigma) by the sample mean, over n_sample drawn outcome sets, of the
/// best draw's net utility max_a r_a - c(a) + discount W(sigma'_a).
/// Runs a fixed sweep budget; sampling noise floors the residual, so
/// convergence is judged by the reported standard errors instead.
inline McviResult mcvi(const PseudoMdp& pmdp, Real discount, int n_sample,
                       int sweeps, std::uint64_t seed) {
    pmdp.require_valid();
    if (n_sample < 1 || sweeps < 1)
        throw std::invalid_argument("mcvi: need n_sample >= 1 and sweeps >= 1");
    for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma)
        if (pmdp.draw_count(sigma) > 0x1.0p31)
            throw std::invalid_argument(
                "mcvi: draw count at sigma " + std::to_string(sigma) +
                " too large to sample per sweep");

    const JointSampler sampler(pmdp);
    std::vector<Real> w(pmdp.num_sigma(), Real(0));
    std::vector<Real> next(pmdp.num_sigma());
    McviResult out;
    out.std_error.assign(pmdp.num_sigma(), Real(0));
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        const std::uint64_t sweep_seed =
            substream_seed(seed, static_cast<std::uint64_t>(sweep));
        for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma) {
            SplitMix64 rng(
                substream_seed(sweep_seed, static_cast<std::uint64_t>(sigma)));
            const auto draws =
                static_cast<std::int64_t>(pmdp.draw_count(sigma));
            Real sum = 0, sumsq = 0;
            for (int n = 0; n < n_sample; ++n) {
                Real best = -std::numeric_limits<Real>::infinity();
                for (std::int64_t a = 1; a <= draws; ++a) {
                    const int pair = sampler.sample_pair(sigma, rng);
                    const Real q =
                        pmdp.reward_value(pmdp.pair_reward_index(pair)) -
                        pmdp.cost_at(a) +
                        discount * w[pmdp.pair_sigma(pair)];
                    if (q > best)
                        best = q;
                }
                sum += best;
                sumsq += best * best;
            }
            next[sigma] = sum / n_sample;
            if (sweep == sweeps - 1 && n_sample > 1) {
                const Real var = std::max(
                    Real(0),
                    (sumsq - sum * sum / n_sample) / (n_sample - 1));
                out.std_error[sigma] = std::sqrt(var / n_sample);
            }
        }
        w = next;
    }
    out.values.values = std::move(w);
    out.values.discount = discount;
    out.sweeps = sweeps;
    return out;
}

/// Monte Carlo value iteration over the intermediate states of a factored
/// MDP: per sweep, W(sigma) is the sample mean over states s drawn from the
/// emission kernel of max_a R(s,a) + discount sum_sigma' P(sigma'|s,a)
/// W(sigma').
inline McviResult mcvi(const FactoredMdp& model, Real discount,
                       int n_sample, int sweeps, std::uint64_t seed) {
    if (n_sample < 1 || sweeps < 1)
        throw std::invalid_argument("mcvi: need n_sample >= 1 and sweeps >= 1");
    const int num_states = model.base().num_states();
    // Cumulative emission rows for inverse-cdf sampling.
    std::vector<std::vector<Real>> cumulative(model.num_sigma());
    for (int sigma = 0; sigma < model.num_sigma(); ++sigma) {
        auto& cum = cumulative[sigma];
        cum.resize(static_cast<std::size_t>(num_states));
        const Real* row = model.emission_row(sigma);
        Real run = 0;
        for (int s = 0; s < num_states; ++s) {
            run += row[s];
            cum[static_cast<std::size_t>(s)] = run;
        }
    }

    std::vector<Real> w(model.num_sigma(), Real(0));
    std::vector<Real> next(model.num_sigma());
    McviResult out;
    out.std_error.assign(model.num_sigma(), Real(0));
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        const std::uint64_t sweep_seed =
            substream_seed(seed, static_cast<std::uint64_t>(sweep));
        for (int sigma = 0; sigma < model.num_sigma(); ++sigma) {
            SplitMix64 rng(
                substream_seed(sweep_seed, static_cast<std::uint64_t>(sigma)));
            const auto& cum = cumulative[sigma];
            Real sum = 0, sumsq = 0;
            for (int n = 0; n < n_sample; ++n) {
                const double u = detail::uniform01(rng);
                auto it = std::upper_bound(cum.begin(), cum.end(), u);
                if (it == cum.end())
                    --it;
                const int s = static_cast<int>(it - cum.begin());
                Real best = -std::numeric_limits<Real>::infinity();
                for (int a = 0; a < model.base().num_actions(s); ++a) {
                    Real expect = 0;
                    const Real* inter = model.intermediate_row(s, a);
                    for (int to = 0; to < model.num_sigma(); ++to)
                        expect += inter[to] * w[to];
                    const Real q =
                        model.base().reward(s, a) + discount * expect;
                    if (q > best)
                        best = q;
                }
                sum += best;
                sumsq += best * best;
            }
            next[sigma] = sum / n_sample;
            if (sweep == sweeps - 1 && n_sample > 1) {
                const Real var = std::max(
                    Real(0),
                    (sumsq - sum * sum / n_sample) / (n_sample - 1));
                out.std_error[sigma] = std::sqrt(var / n_sample);
            }
        }
        w = next;
    }
    out.values.values = std::move(w);
    out.values.discount = discount;
    out.sweeps = sweeps;
    return out;
}

/// How the simulated agent picks a draw each epoch. Ties resolve to the
/// lowest index; control_max in particular never consults rewards, so a
/// longer tail is chased only when it strictly beats the best seen so far.
enum class SelectionRule {
    optimal,     // argmax r - c(a) + values[sigma'] (undiscounted scoring)
    myopic,      // argmax r - c(a)
    control_max, // argmax sigma'
    honest,      // always index 1; requires c(1) == 0
};

inline const char* selection_rule_name(SelectionRule rule) {
    switch (rule) {
    case SelectionRule::optimal:
        return "optimal";
    case SelectionRule::myopic:
        return "myopic";
    case SelectionRule::control_max:
        return "control_max";
    case SelectionRule::honest:
        return "honest";
    }
    return "unknown";
}

struct SimulationOptions {
    std::uint64_t steps = 100000;
    int sigma_cap = 16; // samples per epoch capped at 2^sigma_cap draws
    std::uint64_t seed = 1;
    int start_sigma = 0;
    int batches = 100; // batch-means groups for the standard error
};

struct SimulationResult {
    double mean_reward = 0; // net reward per epoch
    double std_error = 0;   // batch-means estimate
    std::uint64_t steps = 0;
    std::vector<double> occupancy; // visit fraction per sigma
};

/// Simulates the chain of ex-ante states under a fixed selection rule and
/// returns the per-epoch net reward with a batch-means standard error.
/// Epoch e draws from its own seed substream, so runs with different rules
/// but the same seed see identical outcome sequences wherever their visited
/// states agree (common random numbers).
inline SimulationResult simulate_strategy(const PseudoMdp& pmdp,
                                          SelectionRule rule,
                                          const std::vector<Real>& values,
                                          const SimulationOptions& opt = {}) {
    pmdp.require_valid();
    if (opt.steps == 0)
        throw std::invalid_argument("simulate_strategy: need steps >= 1");
    if (opt.sigma_cap < 0 || opt.sigma_cap > 30)
        throw std::invalid_argument(
            "simulate_strategy: sigma_cap must lie in [0, 30]");
    if (opt.start_sigma < 0 || opt.start_sigma >= pmdp.num_sigma())
        throw std::invalid_argument(
            "simulate_strategy: start sigma out of range");
    if (rule == SelectionRule::optimal &&
        static_cast<int>(values.size()) != pmdp.num_sigma())
        throw std::invalid_argument(
            "simulate_strategy: optimal rule needs a value per sigma");
    if (rule == SelectionRule::honest && pmdp.cost_at(1) != Real(0))
        throw std::invalid_argument(
            "simulate_strategy: honest rule needs a free first draw, but "
            "c(1) != 0 here");

    const JointSampler sampler(pmdp);
    const double cap = std::exp2(opt.sigma_cap);
    const std::uint64_t batches =
        std::min<std::uint64_t>(static_cast<std::uint64_t>(
                                    std::max(opt.batches, 1)),
                                opt.steps);

    SimulationResult out;
    out.steps = opt.steps;
    out.occupancy.assign(pmdp.num_sigma(), 0.0);
    std::vector<double> batch_sum(batches, 0.0);
    std::vector<std::uint64_t> batch_len(batches, 0);

    int sigma = opt.start_sigma;
    double total = 0;
    for (std::uint64_t e = 0; e < opt.steps; ++e) {
        out.occupancy[sigma] += 1.0;
        SplitMix64 rng(substream_seed(opt.seed, e));
        const double d_full = pmdp.draw_count(sigma);
        const auto draws =
            static_cast<std::int64_t>(std::min(d_full, cap));

        int best_sigma = -1;
        Real best_net = 0;
        Real best_score = 0;
        const std::int64_t considered =
            rule == SelectionRule::honest ? 1 : draws;
        for (std::int64_t a = 1; a <= considered; ++a) {
            const int pair = sampler.sample_pair(sigma, rng);
            const int sigma_to = pmdp.pair_sigma(pair);
            const Real net =
                pmdp.reward_value(pmdp.pair_reward_index(pair)) -
                pmdp.cost_at(a);
            bool take = false;
            Real score = 0;
            switch (rule) {
            case SelectionRule::optimal:
                score = net + values[sigma_to];
                take = a == 1 || score > best_score;
                break;
            case SelectionRule::myopic:
                score = net;
                take = a == 1 || score > best_score;
                break;
            case SelectionRule::control_max:
                take = a == 1 || sigma_to > best_sigma;
                break;
            case SelectionRule::honest:
                take = true;
                break;
            }
            if (take) {
                best_sigma = sigma_to;
                best_net = net;
                best_score = score;
            }
        }

        total += best_net;
        const std::uint64_t b = e * batches / opt.steps;
        batch_sum[b] += best_net;
        batch_len[b] += 1;
        sigma = best_sigma;
    }

    out.mean_reward = total / static_cast<double>(opt.steps);
    for (double& o : out.occupancy)
        o /= static_cast<double>(opt.steps);
    if (batches > 1) {
        double mean_of_means = 0;
        std::vector<double> means(batches);
        for (std::uint64_t b = 0; b < batches; ++b) {
            means[b] = batch_sum[b] / static_cast<double>(batch_len[b]);
            mean_of_means += means[b];
        }
        mean_of_means /= static_cast<double>(batches);
        double ss = 0;
        for (double m : means)
            ss += (m - mean_of_means) * (m - mean_of_means);
        const double var = ss / static_cast<double>(batches - 1);
        out.std_error = std::sqrt(var / static_cast<double>(batches));
    }
    return out;
}

} // namespace pmdp
