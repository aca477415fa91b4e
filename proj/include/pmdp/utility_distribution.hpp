#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pmdp/pseudo_mdp.hpp"
#include "pmdp/reductions.hpp"

namespace pmdp {

/// Sorted, strictly increasing support of achievable utilities
/// r - c(a) + discount W(sigma'). Values closer than the merge tolerance are
/// collapsed onto one point, so every realized utility sits within the
/// tolerance of exactly one grid point.
struct UtilityGrid {
    static constexpr Real kTolerance = 1e-9;

    std::vector<Real> points;

    std::size_t size() const noexcept { return points.size(); }

    /// Index of the point representing utility u; u must be on the grid.
    std::size_t index_of(Real u) const {
        auto it = std::lower_bound(points.begin(), points.end(),
                                   u - kTolerance);
        if (it == points.end() || std::abs(*it - u) > kTolerance)
            throw std::logic_error(
                "UtilityGrid: utility does not lie on the grid");
        return static_cast<std::size_t>(it - points.begin());
    }

    /// Largest index whose point is <= u (up to the tolerance); -1 when u
    /// lies below the whole grid. Step functions recorded on the grid are
    /// right-constant, so this evaluates them at arbitrary queries.
    std::ptrdiff_t predecessor(Real u) const {
        auto it = std::upper_bound(points.begin(), points.end(),
                                   u + kTolerance);
        return (it - points.begin()) - 1;
    }
};

namespace detail {

inline void merge_close(std::vector<Real>& values, Real tolerance) {
    std::sort(values.begin(), values.end());
    std::vector<Real> kept;
    kept.reserve(values.size());
    for (Real v : values)
        if (kept.empty() || v > kept.back() + tolerance)
            kept.push_back(v);
    values = std::move(kept);
}

} // namespace detail

/// Grid of all utilities achievable under value estimate W: the distinct
/// net-reward offsets r - c(a) crossed with the discounted continuation
/// values. Size is bounded by |R| |c(A)| |Sigma|.
inline UtilityGrid build_utility_grid(const PseudoMdp& pmdp,
                                      const std::vector<Real>& w,
                                      Real discount) {
    if (static_cast<int>(w.size()) != pmdp.num_sigma())
        throw std::invalid_argument(
            "build_utility_grid: value vector size mismatch");
    std::vector<Real> deltas;
    const auto costs = pmdp.cost().distinct_values(pmdp.max_draw_count());
    deltas.reserve(pmdp.rewards().size() * costs.size());
    for (Real r : pmdp.rewards())
        for (Real c : costs)
            deltas.push_back(r - c);
    // Exact dedup only: tolerance merging happens once, on the final
    // points, so every raw utility stays within one tolerance of its grid
    // representative (two merge stages would compound the distance).
    std::sort(deltas.begin(), deltas.end());
    deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());

    UtilityGrid grid;
    grid.points.reserve(deltas.size() * w.size());
    for (Real delta : deltas)
        for (Real value : w)
            grid.points.push_back(delta + discount * value);
    detail::merge_close(grid.points, UtilityGrid::kTolerance);
    return grid;
}

/// Step-function cdfs of the best-utility distribution, recorded on a shared
/// grid. Row sigma covers draw_count[sigma] draws; an empty row means the
/// sigma has not been computed by the producing operation.
struct CumulativeUtilityDistribution {
    UtilityGrid grid;
    std::vector<std::vector<Real>> cdf;
    std::vector<double> draw_count;

    /// P(u <= query | sigma): 0 below the grid, saturating at 1 above it.
    Real eval(int sigma, Real query) const {
        const auto idx = grid.predecessor(query);
        if (idx < 0)
            return Real(0);
        return cdf[sigma][static_cast<std::size_t>(idx)];
    }

    /// Expectation of the recorded distribution for sigma.
    Real expectation(int sigma) const {
        const auto& row = cdf[sigma];
        Real acc = 0, prev = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc += grid.points[j] * (row[j] - prev);
            prev = row[j];
        }
        return acc;
    }
};

namespace detail {

/// Grid index of each pair's single-draw utility r - c(1) + discount W.
/// Shared by every sigma since the utility ignores the originating row.
inline std::vector<std::int32_t>
pair_utility_indices(const PseudoMdp& pmdp, const UtilityGrid& grid,
                     const std::vector<Real>& w, Real discount) {
    std::vector<std::int32_t> index(pmdp.num_pairs());
    const Real c1 = pmdp.cost_at(1);
    for (int pair = 0; pair < pmdp.num_pairs(); ++pair) {
        const Real u = pmdp.reward_value(pmdp.pair_reward_index(pair)) - c1 +
                       discount * w[pmdp.pair_sigma(pair)];
        index[pair] = static_cast<std::int32_t>(grid.index_of(u));
    }
    return index;
}

/// Accumulates one sigma's single-draw pmf onto the grid and turns it into
/// a cdf in place. Stored values are clamped at 1 and the top point pinned
/// to exactly 1: the true cdf never exceeds 1, but cumsum rounding can land
/// an ulp above it, and that ulp explodes under d-fold products once d
/// reaches 2^50 or so.
inline void single_draw_row(const PseudoMdp& pmdp, int sigma,
                            const std::vector<std::int32_t>& pair_index,
                            std::vector<Real>& row) {
    std::fill(row.begin(), row.end(), Real(0));
    const auto& joint = pmdp.joint_row(sigma);
    for (std::size_t pair = 0; pair < joint.size(); ++pair)
        row[static_cast<std::size_t>(pair_index[pair])] += joint[pair];
    Real run = 0;
    for (Real& v : row) {
        run += v;
        v = std::min(run, Real(1));
    }
    if (!row.empty())
        row.back() = Real(1);
}

/// Predecessor index of grid[j] + shift for every j, via one merged pass.
inline std::vector<std::int32_t> shifted_predecessors(const UtilityGrid& grid,
                                                      Real shift) {
    const std::size_t n = grid.size();
    std::vector<std::int32_t> idx(n);
    std::ptrdiff_t p = -1;
    for (std::size_t j = 0; j < n; ++j) {
        const Real query = grid.points[j] + shift + UtilityGrid::kTolerance;
        while (p + 1 < static_cast<std::ptrdiff_t>(n) &&
               grid.points[static_cast<std::size_t>(p + 1)] <= query)
            ++p;
        idx[j] = static_cast<std::int32_t>(p);
    }
    return idx;
}

/// One dichotomy doubling in place:
///   cdf_2m(u_j) = cdf_m(u_j) * cdf_m(u_j + shift)
/// where the shifted factor is read through the precomputed predecessor map
/// (index -1 means the query fell below the grid: factor 0). Non-negative
/// shifts walk ascending and negative ones descending so the factor is
/// always read before being overwritten. Vanishing products are flushed to
/// zero, which keeps repeated doublings out of subnormal arithmetic and
/// grows an exact-zero prefix as the max distribution concentrates upward;
/// first_nonzero tracks that prefix so later doublings skip it (skipped
/// entries would compute 0 * x = 0, so results are unchanged bit for bit).
/// Returns the number of entries actually processed.
inline std::size_t apply_doubling(std::vector<Real>& row,
                                  const std::vector<std::int32_t>& idx,
                                  bool shift_nonnegative,
                                  std::size_t& first_nonzero) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(row.size());
    const auto lo = static_cast<std::ptrdiff_t>(first_nonzero);
    if (shift_nonnegative) {
        for (std::ptrdiff_t j = lo; j < n; ++j) {
            const std::int32_t k = idx[static_cast<std::size_t>(j)];
            Real v = k < 0 ? Real(0)
                           : row[static_cast<std::size_t>(j)] *
                                 row[static_cast<std::size_t>(k)];
            row[static_cast<std::size_t>(j)] = v < 1e-300 ? Real(0) : v;
        }
    } else {
        for (std::ptrdiff_t j = n; j-- > lo;) {
            const std::int32_t k = idx[static_cast<std::size_t>(j)];
            Real v = k < 0 ? Real(0)
                           : row[static_cast<std::size_t>(j)] *
                                 row[static_cast<std::size_t>(k)];
            row[static_cast<std::size_t>(j)] = v < 1e-300 ? Real(0) : v;
        }
    }
    while (first_nonzero < row.size() && row[first_nonzero] == Real(0))
        ++first_nonzero;
    return static_cast<std::size_t>(n - lo);
}

/// Query shift for the doubling whose first half covers draw indices
/// 1..half_width.
inline Real doubling_shift(const ShiftDescriptor& shift, double half_width) {
    switch (shift.kind) {
    case ShiftDescriptor::Kind::constant:
        return shift.parameter;
    case ShiftDescriptor::Kind::linear:
        return shift.parameter * static_cast<Real>(half_width);
    }
    throw std::logic_error("unknown shift kind");
}

} // namespace detail

/// Single-draw best-utility cdf for every sigma (the dichotomy's base case:
/// the distribution of r - c(1) + discount W(sigma') under one draw).
inline CumulativeUtilityDistribution
single_draw_cdf(const PseudoMdp& pmdp, const std::vector<Real>& w,
                Real discount) {
    pmdp.require_valid();
    CumulativeUtilityDistribution out;
    out.grid = build_utility_grid(pmdp, w, discount);
    const auto pair_index =
        detail::pair_utility_indices(pmdp, out.grid, w, discount);
    out.cdf.assign(pmdp.num_sigma(), std::vector<Real>(out.grid.size()));
    out.draw_count.assign(pmdp.num_sigma(), 1);
    for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma)
        detail::single_draw_row(pmdp, sigma, pair_index, out.cdf[sigma]);
    return out;
}

/// Advances sigma's row from the single-draw cdf to the full d(sigma) draws
/// by log2 d(sigma) doublings (the product identity over split index
/// windows). Requires the shift descriptor and power-of-two draw counts.
inline CumulativeUtilityDistribution
dichotomy_cdf(const CumulativeUtilityDistribution& single,
              const PseudoMdp& pmdp, int sigma) {
    if (!pmdp.shift().has_value())
        throw std::invalid_argument(
            "dichotomy_cdf: pseudo MDP carries no shift descriptor");
    if (sigma < 0 || sigma >= pmdp.num_sigma())
        throw std::invalid_argument("dichotomy_cdf: sigma out of range");
    if (single.cdf[sigma].empty() || single.draw_count[sigma] != 1)
        throw std::invalid_argument(
            "dichotomy_cdf: input must be a single-draw cdf");
    const int levels = pmdp.log2_draw_count(sigma);

    CumulativeUtilityDistribution out = single;
    auto& row = out.cdf[sigma];
    std::size_t first_nonzero = 0;
    while (first_nonzero < row.size() && row[first_nonzero] == Real(0))
        ++first_nonzero;
    for (int level = 0; level < levels; ++level) {
        const Real shift =
            detail::doubling_shift(*pmdp.shift(), std::exp2(level));
        const auto idx = detail::shifted_predecessors(out.grid, shift);
        detail::apply_doubling(row, idx, shift >= Real(0), first_nonzero);
    }
    out.draw_count[sigma] = pmdp.draw_count(sigma);
    return out;
}

/// Brute-force best-utility distribution for sigma: enumerates every outcome
/// tuple, scores u*(s) = max_a r_a - c(a) + discount W(sigma'_a) and
/// accumulates tuple probabilities on the grid. Exponential in d(sigma);
/// this is the oracle the dichotomy is checked against.
inline CumulativeUtilityDistribution
naive_utility_distribution(const PseudoMdp& pmdp, const std::vector<Real>& w,
                           Real discount, int sigma,
                           std::size_t size_limit = 1 << 20) {
    pmdp.require_valid();
    if (sigma < 0 || sigma >= pmdp.num_sigma())
        throw std::invalid_argument(
            "naive_utility_distribution: sigma out of range");
    CumulativeUtilityDistribution out;
    out.grid = build_utility_grid(pmdp, w, discount);
    out.cdf.assign(pmdp.num_sigma(), {});
    out.draw_count.assign(pmdp.num_sigma(), 0);

    const auto group = detail::enumerate_sigma_group(pmdp, sigma, size_limit);
    std::vector<Real> cost(group.d);
    for (int a = 0; a < group.d; ++a)
        cost[a] = pmdp.cost_at(a + 1);

    std::vector<Real> pmf(out.grid.size(), Real(0));
    for (std::size_t t = 0; t < group.count; ++t) {
        const std::int32_t* digit =
            group.digits.data() + t * static_cast<std::size_t>(group.d);
        Real best = -std::numeric_limits<Real>::infinity();
        for (int a = 0; a < group.d; ++a) {
            const int pair = digit[a];
            const Real q = pmdp.reward_value(pmdp.pair_reward_index(pair)) -
                           cost[a] + discount * w[pmdp.pair_sigma(pair)];
            if (q > best)
                best = q;
        }
        pmf[out.grid.index_of(best)] += group.prob[t];
    }
    auto& row = pmf;
    Real run = 0;
    for (Real& v : row) {
        run += v;
        v = std::min(run, Real(1));
    }
    if (!row.empty())
        row.back() = Real(1);
    out.cdf[sigma] = std::move(pmf);
    out.draw_count[sigma] = pmdp.draw_count(sigma);
    return out;
}

} // namespace pmdp
