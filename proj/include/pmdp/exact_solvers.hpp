#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pmdp/mdp.hpp"
#include "pmdp/pseudo_mdp.hpp"
#include "pmdp/reductions.hpp"

namespace pmdp {

/// Result of a sigma-space (ex-ante) sweep solver. sweep_ops counts the
/// inner scoring operations of one sweep, for complexity checks.
struct SigmaSolveResult {
    ValueVector values;
    SolveDiagnostics diag;
    std::uint64_t sweep_ops = 0;
};

/// Ex-ante value iteration directly on W over sigma: each sweep computes
///   (TW)(sigma) = E_{s ~ P(s|sigma)} [ max_a r_a - c(a) + discount W(s_a) ]
/// by enumerating the outcome tuples of every sigma, so per sweep it costs
/// sum_sigma |S_sigma| d(sigma) scoring operations instead of touching an
/// |S|^2-sized kernel.
inline SigmaSolveResult
exante_value_iteration(const PseudoMdp& pmdp, Real discount,
                       Real epsilon = 1e-9, int max_iters = 10000,
                       std::size_t size_limit = std::size_t(1) << 20) {
    if (!(discount >= Real(0)) || !(discount < Real(1)))
        throw std::invalid_argument(
            "exante_value_iteration: discount must lie in [0, 1)");
    pmdp.require_valid();

    const int n_sigma = pmdp.num_sigma();
    double total_tuples = 0;
    for (int s = 0; s < n_sigma; ++s)
        total_tuples += std::pow(static_cast<double>(pmdp.num_pairs()),
                                 pmdp.draw_count(s));
    if (!(total_tuples <= static_cast<double>(size_limit)))
        throw std::invalid_argument(
            "exante_value_iteration: enumerating sum_sigma (|Sigma||R|)^"
            "d(sigma) = " +
            std::to_string(total_tuples) + " tuples exceeds size_limit " +
            std::to_string(size_limit));

    std::vector<detail::SigmaGroup> groups;
    groups.reserve(n_sigma);
    for (int s = 0; s < n_sigma; ++s)
        groups.push_back(detail::enumerate_sigma_group(pmdp, s, size_limit));

    const int pairs = pmdp.num_pairs();
    std::vector<int> pair_sigma(pairs);
    std::vector<Real> pair_reward(pairs);
    for (int p = 0; p < pairs; ++p) {
        pair_sigma[p] = pmdp.pair_sigma(p);
        pair_reward[p] = pmdp.reward_value(pmdp.pair_reward_index(p));
    }
    if (pmdp.max_draw_count() > static_cast<double>(size_limit))
        throw std::invalid_argument(
            "exante_value_iteration: a draw count exceeds the size limit");
    const int max_d = static_cast<int>(pmdp.max_draw_count());
    std::vector<Real> cost(max_d);
    for (int a = 0; a < max_d; ++a)
        cost[a] = pmdp.cost_at(a + 1);

    SigmaSolveResult result;
    result.values.discount = discount;
    std::vector<Real> w(n_sigma, Real(0)), next(n_sigma);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::uint64_t ops = 0;
        for (int sigma = 0; sigma < n_sigma; ++sigma) {
            const auto& group = groups[sigma];
            Real acc = 0;
            for (std::size_t t = 0; t < group.count; ++t) {
                Real best = -std::numeric_limits<Real>::infinity();
                const std::int32_t* digit =
                    group.digits.data() + t * static_cast<std::size_t>(group.d);
                for (int a = 0; a < group.d; ++a) {
                    const int pair = digit[a];
                    const Real q = pair_reward[pair] - cost[a] +
                                   discount * w[pair_sigma[pair]];
                    if (q > best)
                        best = q;
                }
                ops += static_cast<std::uint64_t>(group.d);
                acc += group.prob[t] * best;
            }
            next[sigma] = acc;
        }
        Real residual = 0;
        for (int s = 0; s < n_sigma; ++s)
            residual = std::max(residual, std::abs(next[s] - w[s]));
        w = next;
        result.sweep_ops = ops;
        result.diag.sweeps = iter + 1;
        result.diag.residual = residual;
        if (residual <= epsilon) {
            result.diag.converged = true;
            break;
        }
    }
    result.values.values = std::move(w);
    return result;
}

/// Finite MDP whose transitions factor through an intermediate variable:
/// P(s'|s,a) = sum_{sigma'} P(sigma'|s,a) P(s'|sigma'), with the successor
/// state conditionally independent of (s, a) given sigma'.
class FactoredMdp {
  public:
    FactoredMdp(FiniteMdp base, int num_sigma,
                   std::vector<Real> intermediate, std::vector<Real> emission)
        : base_(std::move(base)), num_sigma_(num_sigma),
          intermediate_(std::move(intermediate)),
          emission_(std::move(emission)) {
        base_.require_valid();
        if (num_sigma_ < 1)
            throw std::invalid_argument(
                "FactoredMdp: need at least one intermediate state");
        const std::size_t rows = base_.num_rows();
        const auto n = static_cast<std::size_t>(base_.num_states());
        if (intermediate_.size() != rows * static_cast<std::size_t>(num_sigma_))
            throw std::invalid_argument(
                "FactoredMdp: intermediate kernel size mismatch");
        if (emission_.size() != static_cast<std::size_t>(num_sigma_) * n)
            throw std::invalid_argument(
                "FactoredMdp: emission kernel size mismatch");
        check_normalized(intermediate_, static_cast<std::size_t>(num_sigma_),
                         "intermediate");
        check_normalized(emission_, n, "emission");
        check_consistency();
    }

    const FiniteMdp& base() const noexcept { return base_; }
    int num_sigma() const noexcept { return num_sigma_; }

    Real intermediate(int s, int a, int sigma_to) const {
        return intermediate_[base_.row_index(s, a) * num_sigma_ + sigma_to];
    }
    const Real* intermediate_row(int s, int a) const {
        return intermediate_.data() + base_.row_index(s, a) * num_sigma_;
    }
    Real emission(int sigma, int s) const {
        return emission_[static_cast<std::size_t>(sigma) * base_.num_states() +
                         s];
    }
    const Real* emission_row(int sigma) const {
        return emission_.data() +
               static_cast<std::size_t>(sigma) * base_.num_states();
    }

  private:
    void check_normalized(const std::vector<Real>& kernel, std::size_t width,
                          const char* name) const {
        for (std::size_t off = 0; off < kernel.size(); off += width) {
            Real sum = 0;
            for (std::size_t i = 0; i < width; ++i) {
                if (kernel[off + i] < Real(0))
                    throw std::invalid_argument(
                        std::string("FactoredMdp: negative ") + name +
                        " probability");
                sum += kernel[off + i];
            }
            if (std::abs(sum - Real(1)) > 1e-12)
                throw std::invalid_argument(
                    std::string("FactoredMdp: ") + name +
                    " row does not sum to 1");
        }
    }

    /// The factorization must reproduce the base kernel:
    /// sum_sigma' P(sigma'|s,a) P(s'|sigma') == P(s'|s,a) within 1e-9.
    void check_consistency() const {
        const int n = base_.num_states();
        for (int s = 0; s < n; ++s) {
            for (int a = 0; a < base_.num_actions(s); ++a) {
                const Real* inter = intermediate_row(s, a);
                const Real* direct = base_.transition_row(s, a);
                for (int to = 0; to < n; ++to) {
                    Real composed = 0;
                    for (int sig = 0; sig < num_sigma_; ++sig)
                        composed += inter[sig] * emission(sig, to);
                    if (std::abs(composed - direct[to]) > 1e-9)
                        throw std::invalid_argument(
                            "FactoredMdp: intermediate factorization is "
                            "inconsistent with the base transition kernel");
                }
            }
        }
    }

    FiniteMdp base_;
    int num_sigma_ = 0;
    std::vector<Real> intermediate_; // (s,a)-row-major over sigma'
    std::vector<Real> emission_;     // sigma-major over s
};

/// Value iteration over the intermediate variable:
///   (TW)(sigma) = E_{s ~ P(s|sigma)} [ max_a R(s,a)
///                                      + discount E[W(sigma')|s,a] ].
/// The bracket is independent of the outer sigma, so each sweep computes it
/// once per state and then forms the |Sigma| emission averages.
inline SigmaSolveResult factored_value_iteration(const FactoredMdp& model,
                                                 Real discount,
                                                 Real epsilon = 1e-9,
                                                 int max_iters = 10000) {
    if (!(discount >= Real(0)) || !(discount < Real(1)))
        throw std::invalid_argument(
            "factored_value_iteration: discount must lie in [0, 1)");
    const int n = model.base().num_states();
    const int n_sigma = model.num_sigma();

    SigmaSolveResult result;
    result.values.discount = discount;
    std::vector<Real> w(n_sigma, Real(0)), next(n_sigma);
    std::vector<Real> best(n);
    for (int iter = 0; iter < max_iters; ++iter) {
        std::uint64_t ops = 0;
        for (int s = 0; s < n; ++s) {
            Real b = -std::numeric_limits<Real>::infinity();
            for (int a = 0; a < model.base().num_actions(s); ++a) {
                const Real* inter = model.intermediate_row(s, a);
                Real exp = 0;
                for (int sig = 0; sig < n_sigma; ++sig)
                    exp += inter[sig] * w[sig];
                ops += static_cast<std::uint64_t>(n_sigma);
                const Real q = model.base().reward(s, a) + discount * exp;
                if (q > b)
                    b = q;
            }
            best[s] = b;
        }
        for (int sigma = 0; sigma < n_sigma; ++sigma) {
            const Real* em = model.emission_row(sigma);
            Real acc = 0;
            for (int s = 0; s < n; ++s)
                acc += em[s] * best[s];
            ops += static_cast<std::uint64_t>(n);
            next[sigma] = acc;
        }
        Real residual = 0;
        for (int s = 0; s < n_sigma; ++s)
            residual = std::max(residual, std::abs(next[s] - w[s]));
        w = next;
        result.sweep_ops = ops;
        result.diag.sweeps = iter + 1;
        result.diag.residual = residual;
        if (residual <= epsilon) {
            result.diag.converged = true;
            break;
        }
    }
    result.values.values = std::move(w);
    return result;
}

/// Embeds a pseudo MDP into the intermediate-variable form: the base MDP is
/// the ex-post reduction, the intermediate kernel is the indicator of the
/// accepted draw's sigma', and the emission rows are the product laws
/// P(s|sigma).
inline FactoredMdp factored_from_pmdp(const PseudoMdp& pmdp,
                                             std::size_t size_limit = 2000) {
    ExPostReduction reduction = ex_post_reduction(pmdp, size_limit);
    const int n = reduction.mdp.num_states();
    const int n_sigma = pmdp.num_sigma();

    std::vector<Real> intermediate(
        reduction.mdp.num_rows() * static_cast<std::size_t>(n_sigma), Real(0));
    for (int s = 0; s < n; ++s) {
        const ExPostState state = reduction.decode(s, pmdp);
        for (int a = 0; a < reduction.mdp.num_actions(s); ++a)
            intermediate[reduction.mdp.row_index(s, a) * n_sigma +
                         state.outcome(a + 1).sigma_to] = Real(1);
    }

    std::vector<Real> emission(static_cast<std::size_t>(n_sigma) * n, Real(0));
    for (int sigma = 0; sigma < n_sigma; ++sigma) {
        const auto group = detail::enumerate_sigma_group(pmdp, sigma,
                                                         size_limit);
        const int g = reduction.group_of_draw_count(group.d);
        const std::size_t offset = reduction.group_offset[g];
        for (std::size_t t = 0; t < group.count; ++t)
            emission[static_cast<std::size_t>(sigma) * n + offset + t] =
                group.prob[t];
    }
    return FactoredMdp(std::move(reduction.mdp), n_sigma,
                          std::move(intermediate), std::move(emission));
}

namespace detail {

inline void check_sigma_values(const PseudoMdp& pmdp,
                               const std::vector<Real>& values) {
    if (static_cast<int>(values.size()) != pmdp.num_sigma())
        throw std::invalid_argument(
            "extract_action: value vector does not cover every outcome "
            "sigma'");
}

inline std::int64_t best_draw(const PseudoMdp& pmdp, const ExPostState& state,
                              const std::vector<Real>& values, Real discount) {
    check_sigma_values(pmdp, values);
    if (state.draw_count() < 1)
        throw std::invalid_argument("extract_action: empty ex-post state");
    Real best = -std::numeric_limits<Real>::infinity();
    std::int64_t best_a = 1;
    for (std::int64_t a = 1; a <= state.draw_count(); ++a) {
        const auto& outcome = state.outcome(a);
        if (outcome.sigma_to < 0 || outcome.sigma_to >= pmdp.num_sigma())
            throw std::invalid_argument(
                "extract_action: outcome sigma' out of range");
        const Real q = pmdp.reward_value(outcome.reward_index) -
                       pmdp.cost_at(a) +
                       discount * values[outcome.sigma_to];
        if (q > best) {
            best = q;
            best_a = a;
        }
    }
    return best_a;
}

} // namespace detail

/// Optimal draw index (1-based) for a realized ex-post state, scoring each
/// draw as r_a - c(a) + discount W(sigma'_a); ties resolve to the lowest
/// index. Costs O(d(s)) - no sweep is needed once W is known.
inline std::int64_t extract_action_pmdp(const PseudoMdp& pmdp,
                                        const ValueVector& w,
                                        const ExPostState& state) {
    return detail::best_draw(pmdp, state, w.values, w.discount);
}

/// Discount-free variant for relative values.
inline std::int64_t extract_action_pmdp(const PseudoMdp& pmdp,
                                        const RelativeValueVector& w,
                                        const ExPostState& state) {
    return detail::best_draw(pmdp, state, w.values, Real(1));
}

/// Greedy action (0-based) in the intermediate-variable model:
/// argmax_a R(s,a) + discount E[W(sigma')|s,a].
inline int extract_action_factored(const FactoredMdp& model,
                                   const ValueVector& w, int s) {
    if (static_cast<int>(w.values.size()) != model.num_sigma())
        throw std::invalid_argument(
            "extract_action: value vector does not cover every sigma'");
    if (s < 0 || s >= model.base().num_states())
        throw std::invalid_argument("extract_action: state out of range");
    Real best = -std::numeric_limits<Real>::infinity();
    int best_a = 0;
    for (int a = 0; a < model.base().num_actions(s); ++a) {
        const Real* inter = model.intermediate_row(s, a);
        Real exp = 0;
        for (int sig = 0; sig < model.num_sigma(); ++sig)
            exp += inter[sig] * w.values[sig];
        const Real q = model.base().reward(s, a) + w.discount * exp;
        if (q > best) {
            best = q;
            best_a = a;
        }
    }
    return best_a;
}

} // namespace pmdp
