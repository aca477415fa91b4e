#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmdp/mdp.hpp"
#include "pmdp/pseudo_mdp.hpp"

namespace pmdp {

namespace detail {

/// All length-d outcome tuples for one sigma, lexicographic over pair
/// indices, with their product probabilities P(s|sigma).
struct SigmaGroup {
    int d = 0;
    std::size_t count = 0;            // pairs^d
    std::vector<Real> prob;           // per tuple
    std::vector<std::int32_t> digits; // count * d pair indices
};

inline SigmaGroup enumerate_sigma_group(const PseudoMdp& pmdp, int sigma,
                                        std::size_t limit) {
    const int pairs = pmdp.num_pairs();
    const double d_real = pmdp.draw_count(sigma);
    const double count_real = std::pow(static_cast<double>(pairs), d_real);
    if (!(count_real <= static_cast<double>(limit)))
        throw std::invalid_argument(
            "ex-post tuple enumeration for this sigma needs " +
            std::to_string(count_real) + " states, exceeding the limit of " +
            std::to_string(limit));
    SigmaGroup group;
    group.d = static_cast<int>(d_real);
    group.count = static_cast<std::size_t>(count_real);
    group.prob.resize(group.count);
    group.digits.resize(group.count * static_cast<std::size_t>(group.d));
    const auto& row = pmdp.joint_row(sigma);
    for (std::size_t rank = 0; rank < group.count; ++rank) {
        std::size_t rest = rank;
        // Digits left to right, last draw varying fastest.
        for (int i = group.d - 1; i >= 0; --i) {
            group.digits[rank * group.d + i] =
                static_cast<std::int32_t>(rest % pairs);
            rest /= pairs;
        }
        Real p = 1;
        for (int i = 0; i < group.d; ++i)
            p *= row[group.digits[rank * group.d + i]];
        group.prob[rank] = p;
    }
    return group;
}

} // namespace detail

/// Number of states the ex-post reduction materializes: the sum over
/// distinct draw counts d of (|Sigma||R|)^d. Returned as double since it
/// overflows integers long before it is materializable.
inline double ex_post_state_count(const PseudoMdp& pmdp) {
    std::vector<double> seen;
    double total = 0;
    for (int s = 0; s < pmdp.num_sigma(); ++s) {
        const double d = pmdp.draw_count(s);
        bool duplicate = false;
        for (double other : seen)
            duplicate = duplicate || other == d;
        if (duplicate)
            continue;
        seen.push_back(d);
        total += std::pow(static_cast<double>(pmdp.num_pairs()), d);
    }
    return total;
}

/// Human-readable form of the state-count sum, e.g. "40 + 40^2 + 40^4 +
/// 40^8" for the four-draw-level card game.
inline std::string ex_post_size_breakdown(const PseudoMdp& pmdp) {
    std::vector<double> seen;
    for (int s = 0; s < pmdp.num_sigma(); ++s) {
        const double d = pmdp.draw_count(s);
        bool duplicate = false;
        for (double other : seen)
            duplicate = duplicate || other == d;
        if (!duplicate)
            seen.push_back(d);
    }
    std::sort(seen.begin(), seen.end());
    std::ostringstream out;
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (i > 0)
            out << " + ";
        out << pmdp.num_pairs();
        if (seen[i] != 1)
            out << "^" << seen[i];
    }
    return out.str();
}

/// Ex-post reduction: one MDP state per realized outcome tuple, grouped by
/// distinct draw count (groups ascending by d, tuples lexicographic within a
/// group). Action a (0-based; draw index a+1) accepts outcome a+1, and the
/// successor distribution is the product law of the accepted pair's sigma'.
struct ExPostReduction {
    FiniteMdp mdp;
    std::vector<int> d_values;              // distinct draw counts, ascending
    std::vector<std::size_t> group_offset;  // d_values.size() + 1 entries
    int pairs = 0;

    int group_of_draw_count(int d) const {
        for (std::size_t g = 0; g < d_values.size(); ++g)
            if (d_values[g] == d)
                return static_cast<int>(g);
        throw std::invalid_argument("no ex-post group with this draw count");
    }

    /// Decodes a state index; origin is the first sigma with a matching draw
    /// count (states themselves are origin-free tuples).
    ExPostState decode(std::size_t state, const PseudoMdp& pmdp_in) const {
        std::size_t g = 0;
        while (g + 1 < group_offset.size() && state >= group_offset[g + 1])
            ++g;
        const int d = d_values[g];
        std::size_t rest = state - group_offset[g];
        ExPostState out;
        out.outcomes.resize(d);
        for (int i = d - 1; i >= 0; --i) {
            const int pair = static_cast<int>(rest % pairs);
            rest /= pairs;
            out.outcomes[i] = {pmdp_in.pair_sigma(pair),
                               pmdp_in.pair_reward_index(pair)};
        }
        for (int s = 0; s < pmdp_in.num_sigma(); ++s)
            if (pmdp_in.draw_count(s) == d) {
                out.origin = s;
                break;
            }
        return out;
    }

    std::size_t encode(const ExPostState& state,
                       const PseudoMdp& pmdp_in) const {
        const int g = group_of_draw_count(state.draw_count());
        std::size_t rank = 0;
        for (const auto& outcome : state.outcomes)
            rank = rank * pairs +
                   pmdp_in.pair_index(outcome.sigma_to, outcome.reward_index);
        return group_offset[g] + rank;
    }
};

/// Probability P(s | sigma) of drawing exactly this tuple from sigma; zero
/// when the tuple length does not match d(sigma).
inline Real emission_probability(const PseudoMdp& pmdp, int sigma,
                                 const ExPostState& state) {
    if (static_cast<double>(state.draw_count()) != pmdp.draw_count(sigma))
        return Real(0);
    Real p = 1;
    const auto& row = pmdp.joint_row(sigma);
    for (const auto& outcome : state.outcomes)
        p *= row[pmdp.pair_index(outcome.sigma_to, outcome.reward_index)];
    return p;
}

inline ExPostReduction ex_post_reduction(const PseudoMdp& pmdp,
                                         std::size_t size_limit = 2000) {
    pmdp.require_valid();
    const double total = ex_post_state_count(pmdp);
    if (!(total <= static_cast<double>(size_limit))) {
        std::ostringstream msg;
        msg << "ex-post reduction needs " << ex_post_size_breakdown(pmdp)
            << " = " << total
            << " states (the sum over distinct draw counts d of "
               "(|Sigma||R|)^d), exceeding size_limit "
            << size_limit;
        throw std::invalid_argument(msg.str());
    }

    ExPostReduction out;
    out.pairs = pmdp.num_pairs();
    for (int s = 0; s < pmdp.num_sigma(); ++s) {
        const int d = static_cast<int>(pmdp.draw_count(s));
        bool duplicate = false;
        for (int other : out.d_values)
            duplicate = duplicate || other == d;
        if (!duplicate)
            out.d_values.push_back(d);
    }
    std::sort(out.d_values.begin(), out.d_values.end());

    out.group_offset.assign(out.d_values.size() + 1, 0);
    for (std::size_t g = 0; g < out.d_values.size(); ++g) {
        double count = std::pow(static_cast<double>(out.pairs),
                                static_cast<double>(out.d_values[g]));
        out.group_offset[g + 1] =
            out.group_offset[g] + static_cast<std::size_t>(count);
    }
    const std::size_t n_states = out.group_offset.back();

    std::vector<int> actions(n_states);
    for (std::size_t g = 0; g < out.d_values.size(); ++g)
        for (std::size_t s = out.group_offset[g]; s < out.group_offset[g + 1];
             ++s)
            actions[s] = out.d_values[g];
    out.mdp = FiniteMdp(static_cast<int>(n_states), actions);

    // Per-pair lookups shared by every state.
    std::vector<int> pair_sigma(out.pairs), pair_reward(out.pairs);
    for (int p = 0; p < out.pairs; ++p) {
        pair_sigma[p] = pmdp.pair_sigma(p);
        pair_reward[p] = pmdp.pair_reward_index(p);
    }

    for (std::size_t g = 0; g < out.d_values.size(); ++g) {
        const int d = out.d_values[g];
        std::vector<int> digits(d, 0);
        for (std::size_t s = out.group_offset[g]; s < out.group_offset[g + 1];
             ++s) {
            {
                std::size_t rest = s - out.group_offset[g];
                for (int i = d - 1; i >= 0; --i) {
                    digits[i] = static_cast<int>(rest % out.pairs);
                    rest /= out.pairs;
                }
            }
            for (int a = 0; a < d; ++a) {
                const int pair = digits[a];
                const int sigma_next = pair_sigma[pair];
                out.mdp.reward(static_cast<int>(s), a) =
                    pmdp.reward_value(pair_reward[pair]) -
                    pmdp.cost_at(a + 1);
                const int d_next =
                    static_cast<int>(pmdp.draw_count(sigma_next));
                const int g_next = out.group_of_draw_count(d_next);
                const auto& row = pmdp.joint_row(sigma_next);
                for (std::size_t t = out.group_offset[g_next];
                     t < out.group_offset[g_next + 1]; ++t) {
                    std::size_t rest = t - out.group_offset[g_next];
                    Real prob = 1;
                    for (int i = d_next - 1; i >= 0; --i) {
                        prob *= row[rest % out.pairs];
                        rest /= out.pairs;
                    }
                    out.mdp.transition(static_cast<int>(s), a,
                                       static_cast<int>(t)) = prob;
                }
            }
        }
    }
    return out;
}

/// Ex-ante reduction: states are the sigma themselves and each action is a
/// full selection function alpha mapping every possible outcome tuple of
/// sigma to a draw index. Actions are enumerated lexicographically over the
/// tuple enumeration (last tuple's choice varying fastest).
struct ExAnteReduction {
    FiniteMdp mdp;
    std::vector<std::size_t> tuple_counts; // |S_sigma| per sigma
    std::vector<double> action_counts;     // d(sigma)^|S_sigma| per sigma

    /// 1-based chosen draw index per lexicographic outcome tuple.
    std::vector<int> decode_action(int sigma, int action,
                                   const PseudoMdp& pmdp_in) const {
        const int d = static_cast<int>(pmdp_in.draw_count(sigma));
        std::vector<int> choices(tuple_counts[sigma]);
        std::int64_t rest = action;
        for (std::size_t i = choices.size(); i-- > 0;) {
            choices[i] = static_cast<int>(rest % d) + 1;
            rest /= d;
        }
        return choices;
    }
};

inline ExAnteReduction ex_ante_reduction(const PseudoMdp& pmdp,
                                         std::size_t size_limit = 1 << 20) {
    pmdp.require_valid();
    const int n_sigma = pmdp.num_sigma();
    double total_actions = 0;
    std::ostringstream breakdown;
    for (int s = 0; s < n_sigma; ++s) {
        const double d = pmdp.draw_count(s);
        const double tuples = std::pow(static_cast<double>(pmdp.num_pairs()), d);
        const double actions = std::pow(d, tuples);
        total_actions += actions;
        if (s > 0)
            breakdown << " + ";
        breakdown << d << "^((" << pmdp.num_sigma() << "*"
                  << pmdp.num_rewards() << ")^" << d << ")";
    }
    if (!(total_actions <= static_cast<double>(size_limit))) {
        std::ostringstream msg;
        msg << "ex-ante reduction needs " << breakdown.str() << " = "
            << total_actions
            << " selection-function actions (the sum over sigma of "
               "d(sigma)^((|Sigma||R|)^d(sigma))), exceeding size_limit "
            << size_limit;
        throw std::invalid_argument(msg.str());
    }

    ExAnteReduction out;
    std::vector<int> actions_per_state(n_sigma);
    for (int s = 0; s < n_sigma; ++s) {
        const double d = pmdp.draw_count(s);
        const double tuples = std::pow(static_cast<double>(pmdp.num_pairs()), d);
        out.tuple_counts.push_back(static_cast<std::size_t>(tuples));
        out.action_counts.push_back(std::pow(d, tuples));
        actions_per_state[s] = static_cast<int>(out.action_counts[s]);
    }
    out.mdp = FiniteMdp(n_sigma, actions_per_state);

    for (int sigma = 0; sigma < n_sigma; ++sigma) {
        const auto group = detail::enumerate_sigma_group(
            pmdp, sigma, static_cast<std::size_t>(1) << 26);
        const int d = group.d;
        std::vector<int> choices(group.count, 0); // 0-based slot choices
        const int n_actions = actions_per_state[sigma];
        for (int alpha = 0; alpha < n_actions; ++alpha) {
            Real reward = 0;
            std::vector<Real> trans(n_sigma, Real(0));
            for (std::size_t t = 0; t < group.count; ++t) {
                const int pair =
                    group.digits[t * d + static_cast<std::size_t>(choices[t])];
                const Real p = group.prob[t];
                reward += p * (pmdp.reward_value(pmdp.pair_reward_index(pair)) -
                               pmdp.cost_at(choices[t] + 1));
                trans[pmdp.pair_sigma(pair)] += p;
            }
            out.mdp.reward(sigma, alpha) = reward;
            for (int to = 0; to < n_sigma; ++to)
                out.mdp.transition(sigma, alpha, to) = trans[to];
            // Advance the selection function: last tuple's choice fastest.
            for (std::size_t t = group.count; t-- > 0;) {
                if (++choices[t] < d)
                    break;
                choices[t] = 0;
            }
        }
    }
    return out;
}

} // namespace pmdp
