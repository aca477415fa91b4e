#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "pmdp/mdp.hpp"
#include "pmdp/pseudo_mdp.hpp"
#include "pmdp/utility_distribution.hpp"

namespace pmdp {

/// Per-sweep instrumentation for the dichotomy Bellman operator, split by
/// phase so benchmarks can attribute cost.
struct FastSweepStats {
    double grid_seconds = 0;
    double single_draw_seconds = 0;
    double doubling_seconds = 0;
    std::uint64_t doubling_ops = 0;
    std::size_t grid_size = 0;
};

namespace detail {

class PhaseTimer {
  public:
    using Clock = std::chrono::steady_clock;
    PhaseTimer() : start_(Clock::now()) {}
    double restart() {
        const auto now = Clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

  private:
    Clock::time_point start_;
};

} // namespace detail

/// One Bellman sweep of the ex-ante operator through the utility variable
/// change: rebuilds the utility grid and single-draw cdf for the current W,
/// then advances each sigma to its d(sigma) draws by log2 d(sigma)
/// dichotomy doublings and takes the expectation. Cost per sweep is
/// O(|U| (|U| + max_sigma log2 d)); memory stays at O(|U|) per worker since
/// rows are streamed one sigma at a time.
inline std::vector<Real> fast_bellman(const PseudoMdp& pmdp,
                                      const std::vector<Real>& w,
                                      Real discount, int threads = 1,
                                      FastSweepStats* stats = nullptr) {
    if (!pmdp.shift().has_value())
        throw std::invalid_argument(
            "fast_bellman: pseudo MDP carries no shift descriptor");
    if (static_cast<int>(w.size()) != pmdp.num_sigma())
        throw std::invalid_argument("fast_bellman: value vector size mismatch");

    detail::PhaseTimer timer;
    const UtilityGrid grid = build_utility_grid(pmdp, w, discount);
    const auto pair_index =
        detail::pair_utility_indices(pmdp, grid, w, discount);

    // Shifted predecessor maps per doubling level; a constant shift uses the
    // same map at every level, a linear one scales with the half width 2^i.
    int max_levels = 0;
    for (int sigma = 0; sigma < pmdp.num_sigma(); ++sigma)
        max_levels = std::max(max_levels, pmdp.log2_draw_count(sigma));
    const bool constant_shift =
        pmdp.shift()->kind == ShiftDescriptor::Kind::constant;
    std::vector<std::vector<std::int32_t>> level_map;
    std::vector<bool> level_nonneg;
    const int distinct_levels = constant_shift ? std::min(max_levels, 1)
                                               : max_levels;
    level_map.reserve(distinct_levels);
    for (int level = 0; level < distinct_levels; ++level) {
        const Real shift =
            detail::doubling_shift(*pmdp.shift(), std::exp2(level));
        level_map.push_back(detail::shifted_predecessors(grid, shift));
        level_nonneg.push_back(shift >= Real(0));
    }
    const double grid_seconds = timer.restart();

    std::vector<Real> next(pmdp.num_sigma());
    const auto run_range = [&](int begin, int end, double& single_s,
                               double& doubling_s, std::uint64_t& ops) {
        std::vector<Real> row(grid.size());
        detail::PhaseTimer local;
        for (int sigma = begin; sigma < end; ++sigma) {
            detail::single_draw_row(pmdp, sigma, pair_index, row);
            single_s += local.restart();
            std::size_t first_nonzero = 0;
            while (first_nonzero < row.size() &&
                   row[first_nonzero] == Real(0))
                ++first_nonzero;
            const int levels = pmdp.log2_draw_count(sigma);
            for (int level = 0; level < levels; ++level) {
                const int m = constant_shift ? 0 : level;
                ops += detail::apply_doubling(row, level_map[m],
                                              level_nonneg[m], first_nonzero);
            }
            Real acc = 0, prev = 0;
            for (std::size_t j = first_nonzero; j < grid.size(); ++j) {
                acc += grid.points[j] * (row[j] - prev);
                prev = row[j];
            }
            next[sigma] = acc;
            doubling_s += local.restart();
        }
    };

    double single_seconds = 0, doubling_seconds = 0;
    std::uint64_t ops = 0;
    if (threads <= 1 || pmdp.num_sigma() < 2) {
        run_range(0, pmdp.num_sigma(), single_seconds, doubling_seconds, ops);
    } else {
        const int workers = std::min(threads, pmdp.num_sigma());
        std::vector<double> single_w(workers, 0), doubling_w(workers, 0);
        std::vector<std::uint64_t> ops_w(workers, 0);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) {
            const int begin = pmdp.num_sigma() * t / workers;
            const int end = pmdp.num_sigma() * (t + 1) / workers;
            pool.emplace_back([&, t, begin, end] {
                run_range(begin, end, single_w[t], doubling_w[t], ops_w[t]);
            });
        }
        for (auto& th : pool)
            th.join();
        for (int t = 0; t < workers; ++t) {
            // Wall-clock per phase: the longest worker dominates.
            single_seconds = std::max(single_seconds, single_w[t]);
            doubling_seconds = std::max(doubling_seconds, doubling_w[t]);
            ops += ops_w[t];
        }
    }

    if (stats) {
        stats->grid_seconds = grid_seconds;
        stats->single_draw_seconds = single_seconds;
        stats->doubling_seconds = doubling_seconds;
        stats->doubling_ops = ops;
        stats->grid_size = grid.size();
    }
    return next;
}

struct FastSolveOptions {
    Real discount = 1;      // required < 1 unless relative
    bool relative = false;  // discount-free average-reward mode
    int reference = 0;      // sigma pinned to 0 in relative mode
    Real epsilon = -1;      // <0 picks 1e-9 discounted / 1e-6 relative
    int max_iters = 10000;
    Real damping = 1;
    int threads = 1;
    bool collect_stats = false;
};

struct FastSolveResult {
    bool relative = false;
    ValueVector values;                  // discounted mode
    RelativeValueVector relative_values; // relative mode
    SolveDiagnostics diag;
    std::vector<FastSweepStats> sweep_stats; // when collect_stats
};

/// Value iteration driven by fast_bellman. Discounted mode iterates
/// W <- T*W to the sup-norm fixed point. Relative mode runs the recentred
/// discount-free iteration dW <- T*dW - T*dW(reference) 1, whose recentring
/// offset converges to the per-step gain; the reference component is pinned
/// to exactly zero after every sweep.
inline FastSolveResult fast_value_iteration(const PseudoMdp& pmdp,
                                            const FastSolveOptions& opt = {}) {
    pmdp.require_valid();
    FastSolveResult out;
    out.relative = opt.relative;
    const Real epsilon =
        opt.epsilon > 0 ? opt.epsilon : (opt.relative ? 1e-6 : 1e-9);
    if (opt.relative) {
        if (opt.discount != Real(1))
            throw std::invalid_argument(
                "fast_value_iteration: relative mode is discount-free; "
                "leave discount at 1");
        if (opt.reference < 0 || opt.reference >= pmdp.num_sigma())
            throw std::invalid_argument(
                "fast_value_iteration: reference sigma out of range");
    } else if (!(opt.discount >= Real(0) && opt.discount < Real(1))) {
        throw std::invalid_argument(
            "fast_value_iteration: discounted mode needs discount in [0,1)");
    }
    if (!(opt.damping > Real(0) && opt.damping <= Real(1)))
        throw std::invalid_argument(
            "fast_value_iteration: damping must lie in (0,1]");

    std::vector<Real> w(pmdp.num_sigma(), Real(0));
    Real gain = 0;
    out.diag.converged = false;
    for (int sweep = 0; sweep < opt.max_iters; ++sweep) {
        FastSweepStats stats;
        std::vector<Real> next =
            fast_bellman(pmdp, w, opt.discount, opt.threads,
                         opt.collect_stats ? &stats : nullptr);
        if (opt.collect_stats)
            out.sweep_stats.push_back(stats);
        if (opt.relative) {
            const Real offset = next[opt.reference];
            for (Real& v : next)
                v -= offset;
            gain = offset;
        }
        Real residual = 0;
        for (std::size_t i = 0; i < w.size(); ++i)
            residual = std::max(residual, std::abs(next[i] - w[i]));
        if (opt.damping == Real(1)) {
            w = std::move(next);
        } else {
            for (std::size_t i = 0; i < w.size(); ++i)
                w[i] += opt.damping * (next[i] - w[i]);
            if (opt.relative)
                w[opt.reference] = 0;
        }
        out.diag.sweeps = sweep + 1;
        out.diag.residual = residual;
        if (residual <= epsilon) {
            out.diag.converged = true;
            break;
        }
    }
    if (opt.relative) {
        out.relative_values.values = std::move(w);
        out.relative_values.reference = opt.reference;
        out.relative_values.gain = gain;
    } else {
        out.values.values = std::move(w);
        out.values.discount = opt.discount;
    }
    return out;
}

} // namespace pmdp
