#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmdp {

using Real = double;

/// State values together with the discount they were computed for.
struct ValueVector {
    std::vector<Real> values;
    Real discount = Real(1);
};

/// Discount-free relative values: values[reference] == 0 and gain is the
/// long-run average reward per step of the greedy policy.
struct RelativeValueVector {
    std::vector<Real> values;
    int reference = 0;
    Real gain = Real(0);
};

/// Deterministic policy: one 0-based action index per state.
using Policy = std::vector<int>;

/// Dense finite MDP. Action sets may differ per state; the transition kernel
/// and rewards are stored contiguously per (state, action) row, actions
/// 0-based within each state.
class FiniteMdp {
  public:
    FiniteMdp() = default;

    FiniteMdp(int states, const std::vector<int>& actions_per_state)
        : n_(states) {
        if (states < 0)
            throw std::invalid_argument("FiniteMdp: negative state count");
        if (static_cast<int>(actions_per_state.size()) != states)
            throw std::invalid_argument(
                "FiniteMdp: actions_per_state size mismatch");
        row_of_.assign(static_cast<std::size_t>(states) + 1, 0);
        for (int s = 0; s < states; ++s) {
            if (actions_per_state[s] < 1)
                throw std::invalid_argument(
                    "FiniteMdp: every state needs at least one action");
            row_of_[s + 1] = row_of_[s] +
                             static_cast<std::size_t>(actions_per_state[s]);
        }
        reward_.assign(row_of_[n_], Real(0));
        transition_.assign(row_of_[n_] * static_cast<std::size_t>(n_),
                           Real(0));
    }

    int num_states() const noexcept { return n_; }

    int num_actions(int s) const {
        return static_cast<int>(row_of_[s + 1] - row_of_[s]);
    }

    std::size_t num_rows() const noexcept { return reward_.size(); }

    /// Flat index of the (state, action) row; rows are laid out state-major.
    std::size_t row_index(int s, int a) const { return row(s, a); }

    Real reward(int s, int a) const { return reward_[row(s, a)]; }
    Real& reward(int s, int a) { return reward_[row(s, a)]; }

    Real transition(int s, int a, int to) const {
        return transition_[row(s, a) * n_ + to];
    }
    Real& transition(int s, int a, int to) {
        return transition_[row(s, a) * n_ + to];
    }

    /// Contiguous row of transition probabilities for (s, a).
    const Real* transition_row(int s, int a) const {
        return transition_.data() + row(s, a) * n_;
    }

    /// Structural checks: probability rows sum to 1 within 1e-12, entries
    /// non-negative, rewards finite. Returns human-readable violations.
    std::vector<std::string> validate() const {
        std::vector<std::string> report;
        for (int s = 0; s < n_; ++s) {
            for (int a = 0; a < num_actions(s); ++a) {
                const Real* t = transition_row(s, a);
                Real sum = 0;
                for (int to = 0; to < n_; ++to) {
                    if (t[to] < Real(0))
                        report.push_back(describe(s, a) +
                                         ": negative transition probability");
                    sum += t[to];
                }
                if (std::abs(sum - Real(1)) > 1e-12)
                    report.push_back(describe(s, a) +
                                     ": transition row sums to " +
                                     std::to_string(sum));
                if (!std::isfinite(reward(s, a)))
                    report.push_back(describe(s, a) + ": non-finite reward");
            }
        }
        return report;
    }

    /// Throws std::invalid_argument listing all validation failures.
    void require_valid() const {
        auto report = validate();
        if (report.empty())
            return;
        std::ostringstream msg;
        msg << "invalid FiniteMdp:";
        for (const auto& line : report)
            msg << "\n  " << line;
        throw std::invalid_argument(msg.str());
    }

  private:
    std::size_t row(int s, int a) const {
        return row_of_[s] + static_cast<std::size_t>(a);
    }

    static std::string describe(int s, int a) {
        return "state " + std::to_string(s) + " action " + std::to_string(a);
    }

    int n_ = 0;
    std::vector<std::size_t> row_of_{0};
    std::vector<Real> reward_;
    std::vector<Real> transition_;
};

/// Convergence diagnostics shared by the iterative solvers. A run that hits
/// max_iters is reported (converged == false), never thrown.
struct SolveDiagnostics {
    int sweeps = 0;
    Real residual = 0;
    bool converged = false;
};

struct ValueIterationResult {
    ValueVector values;
    SolveDiagnostics diag;
};

struct RelativeIterationResult {
    RelativeValueVector values;
    SolveDiagnostics diag;
};

/// One application of the Bellman optimality operator
///   (TV)(s) = max_a R(s,a) + discount * sum_{s'} P(s'|s,a) V(s').
inline std::vector<Real> bellman_sweep(const FiniteMdp& mdp,
                                       const std::vector<Real>& values,
                                       Real discount) {
    if (static_cast<int>(values.size()) != mdp.num_states())
        throw std::invalid_argument("bellman_sweep: value size mismatch");
    const int n = mdp.num_states();
    std::vector<Real> out(n);
    for (int s = 0; s < n; ++s) {
        Real best = -std::numeric_limits<Real>::infinity();
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const Real* t = mdp.transition_row(s, a);
            Real exp = 0;
            for (int to = 0; to < n; ++to)
                exp += t[to] * values[to];
            Real q = mdp.reward(s, a) + discount * exp;
            if (q > best)
                best = q;
        }
        out[s] = best;
    }
    return out;
}

/// Value iteration from V = 0 until successive iterates are within epsilon in
/// sup norm. Requires 0 <= discount < 1; the discount-free case is served by
/// relative_value_iteration.
inline ValueIterationResult value_iteration(const FiniteMdp& mdp,
                                            Real discount, Real epsilon = 1e-9,
                                            int max_iters = 10000) {
    if (!(discount >= Real(0)) || !(discount < Real(1)))
        throw std::invalid_argument(
            "value_iteration: discount must lie in [0, 1)");
    mdp.require_valid();
    ValueIterationResult result;
    result.values.discount = discount;
    std::vector<Real> v(mdp.num_states(), Real(0));
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<Real> next = bellman_sweep(mdp, v, discount);
        Real residual = 0;
        for (int s = 0; s < mdp.num_states(); ++s)
            residual = std::max(residual, std::abs(next[s] - v[s]));
        v = std::move(next);
        result.diag.sweeps = iter + 1;
        result.diag.residual = residual;
        if (residual <= epsilon) {
            result.diag.converged = true;
            break;
        }
    }
    result.values.values = std::move(v);
    return result;
}

/// Greedy policy for the given values; ties resolve to the lowest action
/// index.
inline Policy extract_policy(const FiniteMdp& mdp, const ValueVector& values) {
    if (static_cast<int>(values.values.size()) != mdp.num_states())
        throw std::invalid_argument("extract_policy: value size mismatch");
    const int n = mdp.num_states();
    Policy policy(n, 0);
    for (int s = 0; s < n; ++s) {
        Real best = -std::numeric_limits<Real>::infinity();
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const Real* t = mdp.transition_row(s, a);
            Real exp = 0;
            for (int to = 0; to < n; ++to)
                exp += t[to] * values.values[to];
            Real q = mdp.reward(s, a) + values.discount * exp;
            if (q > best) {
                best = q;
                policy[s] = a;
            }
        }
    }
    return policy;
}

inline Policy extract_policy(const FiniteMdp& mdp,
                             const RelativeValueVector& values) {
    return extract_policy(mdp, ValueVector{values.values, Real(1)});
}

/// Discount-free relative value iteration: iterates the recentred operator
///   dV <- T dV - (T dV)(reference)
/// so values[reference] == 0 exactly after every sweep; the recentring offset
/// of the final sweep is the gain (average reward per step).
///
/// `damping` blends each sweep with the previous iterate (the aperiodicity
/// transformation): damping 1 is the plain sweep, the 0.5 default also
/// converges on periodic chains. The damped and plain operators share their
/// fixed points, and the residual is measured on the plain recentred operator
/// either way, so convergence certifies an epsilon-fixed-point of the
/// recentred Bellman operator.
inline RelativeIterationResult relative_value_iteration(const FiniteMdp& mdp,
                                                        int reference = 0,
                                                        Real epsilon = 1e-6,
                                                        int max_iters = 10000,
                                                        Real damping = 0.5) {
    if (reference < 0 || reference >= mdp.num_states())
        throw std::invalid_argument(
            "relative_value_iteration: reference state out of range");
    if (!(damping > Real(0)) || damping > Real(1))
        throw std::invalid_argument(
            "relative_value_iteration: damping must lie in (0, 1]");
    mdp.require_valid();
    RelativeIterationResult result;
    result.values.reference = reference;
    const int n = mdp.num_states();
    std::vector<Real> dv(n, Real(0));
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<Real> swept = bellman_sweep(mdp, dv, Real(1));
        const Real offset = swept[reference];
        Real residual = 0;
        for (int s = 0; s < n; ++s) {
            swept[s] -= offset;
            residual = std::max(residual, std::abs(swept[s] - dv[s]));
        }
        for (int s = 0; s < n; ++s)
            dv[s] = (Real(1) - damping) * dv[s] + damping * swept[s];
        result.values.gain = offset;
        result.diag.sweeps = iter + 1;
        result.diag.residual = residual;
        if (residual <= epsilon) {
            result.diag.converged = true;
            break;
        }
    }
    result.values.values = std::move(dv);
    return result;
}

} // namespace pmdp
