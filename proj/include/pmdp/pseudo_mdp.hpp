#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmdp/mdp.hpp"

namespace pmdp {

/// Per-draw fee c(a), a 1-based. Besides an explicit table two closed forms
/// are supported so that draw counts like 2^512 (where a dense table cannot
/// exist) still have well-defined costs:
///   linear:   c(a) = c0 + c1 * a
///   popcount: c(a) = base + step * popcount(a - 1)
class DrawCosts {
  public:
    enum class Form { table, linear, popcount };

    static DrawCosts table(std::vector<Real> values) {
        DrawCosts c;
        c.form_ = Form::table;
        c.table_ = std::move(values);
        return c;
    }

    static DrawCosts linear(Real c0, Real c1) {
        DrawCosts c;
        c.form_ = Form::linear;
        c.p0_ = c0;
        c.p1_ = c1;
        return c;
    }

    static DrawCosts popcount_form(Real base, Real step) {
        DrawCosts c;
        c.form_ = Form::popcount;
        c.p0_ = base;
        c.p1_ = step;
        return c;
    }

    Form form() const noexcept { return form_; }
    const std::vector<Real>& table_values() const { return table_; }
    Real param0() const noexcept { return p0_; }
    Real param1() const noexcept { return p1_; }

    Real operator()(std::int64_t a) const {
        if (a < 1)
            throw std::invalid_argument("DrawCosts: draw index is 1-based");
        switch (form_) {
        case Form::table:
            if (static_cast<std::size_t>(a) > table_.size())
                throw std::invalid_argument(
                    "DrawCosts: index beyond cost table");
            return table_[static_cast<std::size_t>(a - 1)];
        case Form::linear:
            return p0_ + p1_ * static_cast<Real>(a);
        case Form::popcount:
            return p0_ + p1_ * static_cast<Real>(std::popcount(
                              static_cast<std::uint64_t>(a - 1)));
        }
        throw std::logic_error("DrawCosts: unknown form");
    }

    /// True when c(a) is defined for every a in 1..max_draws.
    bool covers(double max_draws) const noexcept {
        if (form_ != Form::table)
            return true;
        return static_cast<double>(table_.size()) >= max_draws;
    }

    /// Sorted distinct cost values over draw indices 1..max_draws. For the
    /// linear form this enumerates indices, so max_draws must stay modest
    /// (the utility-grid bound |R − c(A)| does too); the popcount form only
    /// ever has O(log max_draws) distinct values.
    std::vector<Real> distinct_values(double max_draws) const {
        std::vector<Real> out;
        switch (form_) {
        case Form::table: {
            const auto n = static_cast<std::size_t>(
                std::min(max_draws, static_cast<double>(table_.size())));
            out.assign(table_.begin(), table_.begin() + n);
            break;
        }
        case Form::linear: {
            if (p1_ == Real(0)) {
                out.push_back(p0_);
                break;
            }
            constexpr double kMaxEnum = 1 << 24;
            if (max_draws > kMaxEnum)
                throw std::invalid_argument(
                    "DrawCosts: linear cost values cannot be enumerated for "
                    "this many draws");
            for (std::int64_t a = 1; a <= static_cast<std::int64_t>(max_draws);
                 ++a)
                out.push_back(p0_ + p1_ * static_cast<Real>(a));
            break;
        }
        case Form::popcount: {
            for (int k = 0; k <= max_popcount_below(max_draws); ++k)
                out.push_back(p0_ + p1_ * static_cast<Real>(k));
            break;
        }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

  private:
    /// Largest popcount of a - 1 over a in 1..max_draws.
    static int max_popcount_below(double max_draws) {
        if (max_draws < 1)
            return 0;
        const double log2d = std::log2(max_draws);
        if (std::exp2(std::round(log2d)) == max_draws)
            return static_cast<int>(std::round(log2d));
        if (max_draws > 0x1.0p53)
            throw std::invalid_argument(
                "DrawCosts: non-power-of-two draw count too large");
        std::uint64_t n = static_cast<std::uint64_t>(max_draws) - 1;
        int best = std::popcount(n);
        for (int i = 63; i >= 0; --i) {
            if (!(n >> i & 1))
                continue;
            // Clear bit i, set all bits below it.
            std::uint64_t x = (n & ~(std::uint64_t(1) << i)) |
                              ((std::uint64_t(1) << i) - 1);
            best = std::max(best, std::popcount(x));
        }
        return best;
    }

    Form form_ = Form::table;
    std::vector<Real> table_;
    Real p0_ = 0;
    Real p1_ = 0;
};

/// Declares how restricted utility distributions shift when the draw-index
/// window moves, enabling the dichotomy construction:
///   constant: cdf window [i+m, i+2m) equals window [i, i+m) queried at
///             utility + parameter (popcount-style costs)
///   linear:   the query shift for a doubling from half-width m is
///             parameter * m (costs c0 + c1*a with c1 == parameter)
struct ShiftDescriptor {
    enum class Kind { constant, linear };
    Kind kind = Kind::constant;
    Real parameter = 0;
};

/// Two-stage decision process: from ex-ante state sigma, d(sigma) IID pairs
/// (sigma', r) are drawn from the joint row; the agent picks a 1-based draw
/// index a, pays c(a), earns the pair's reward and moves to its sigma'.
///
/// The joint row for sigma is dense over (sigma', reward-index), row-major:
/// entry sigma' * |R| + r.
class PseudoMdp {
  public:
    PseudoMdp() = default;

    PseudoMdp(int num_sigma, std::vector<Real> rewards,
              std::vector<std::vector<Real>> joint, std::vector<double> draws,
              DrawCosts cost, std::optional<ShiftDescriptor> shift)
        : num_sigma_(num_sigma), rewards_(std::move(rewards)),
          joint_(std::move(joint)), draws_(std::move(draws)),
          cost_(std::move(cost)), shift_(shift) {}

    int num_sigma() const noexcept { return num_sigma_; }
    int num_rewards() const noexcept {
        return static_cast<int>(rewards_.size());
    }
    /// Dense (sigma', reward) pair count |Sigma| * |R|.
    int num_pairs() const noexcept { return num_sigma_ * num_rewards(); }

    const std::vector<Real>& rewards() const noexcept { return rewards_; }
    Real reward_value(int r_index) const { return rewards_[r_index]; }

    const std::vector<Real>& joint_row(int sigma) const {
        return joint_[sigma];
    }
    Real joint(int sigma, int sigma_to, int r_index) const {
        return joint_[sigma][pair_index(sigma_to, r_index)];
    }

    int pair_index(int sigma_to, int r_index) const {
        return sigma_to * num_rewards() + r_index;
    }
    int pair_sigma(int pair) const { return pair / num_rewards(); }
    int pair_reward_index(int pair) const { return pair % num_rewards(); }

    /// Draw count d(sigma). Stored as double so that exact powers of two up
    /// to 2^1023 are representable; small counts are exact integers.
    double draw_count(int sigma) const { return draws_[sigma]; }
    const std::vector<double>& draw_counts() const noexcept { return draws_; }

    double max_draw_count() const {
        return *std::max_element(draws_.begin(), draws_.end());
    }

    static bool is_power_of_two(double d) {
        return d >= 1 && std::exp2(std::round(std::log2(d))) == d;
    }

    /// log2 d(sigma) for power-of-two counts (the dichotomy requirement).
    int log2_draw_count(int sigma) const {
        const double d = draws_[sigma];
        if (!is_power_of_two(d))
            throw std::invalid_argument(
                "PseudoMdp: draw count is not a power of two");
        return static_cast<int>(std::round(std::log2(d)));
    }

    const DrawCosts& cost() const noexcept { return cost_; }
    Real cost_at(std::int64_t a) const { return cost_(a); }

    const std::optional<ShiftDescriptor>& shift() const noexcept {
        return shift_;
    }

    /// Structural checks: joint rows are probability distributions within
    /// 1e-12, draw counts are positive integers (powers of two whenever a
    /// shift descriptor is present), the cost covers 1..max d, rewards are
    /// finite and strictly increasing. Returns human-readable violations.
    std::vector<std::string> validate() const {
        std::vector<std::string> report;
        if (num_sigma_ < 1)
            report.push_back("at least one ex-ante state required");
        if (rewards_.empty())
            report.push_back("empty reward support");
        for (std::size_t i = 0; i < rewards_.size(); ++i) {
            if (!std::isfinite(rewards_[i]))
                report.push_back("non-finite reward value");
            if (i > 0 && !(rewards_[i] > rewards_[i - 1]))
                report.push_back("reward support must be strictly increasing");
        }
        if (static_cast<int>(joint_.size()) != num_sigma_)
            report.push_back("joint table must have one row per sigma");
        for (int s = 0; s < static_cast<int>(joint_.size()); ++s) {
            const auto& row = joint_[s];
            if (static_cast<int>(row.size()) != num_pairs()) {
                report.push_back("joint row " + std::to_string(s) +
                                 " has wrong length");
                continue;
            }
            Real sum = 0;
            bool negative = false;
            for (Real p : row) {
                if (p < Real(0))
                    negative = true;
                sum += p;
            }
            if (negative)
                report.push_back("joint row " + std::to_string(s) +
                                 " has negative entries");
            if (std::abs(sum - Real(1)) > 1e-12)
                report.push_back("joint row " + std::to_string(s) +
                                 " sums to " + std::to_string(sum));
        }
        if (static_cast<int>(draws_.size()) != num_sigma_)
            report.push_back("draw counts must have one entry per sigma");
        for (int s = 0; s < static_cast<int>(draws_.size()); ++s) {
            const double d = draws_[s];
            const bool small_integer =
                d <= 0x1.0p53 && d >= 1 && std::floor(d) == d;
            if (!(small_integer || is_power_of_two(d)))
                report.push_back("draw count for sigma " + std::to_string(s) +
                                 " is not a positive integer");
            else if (shift_.has_value() && !is_power_of_two(d))
                report.push_back("draw count for sigma " + std::to_string(s) +
                                 " must be a power of two when a shift "
                                 "descriptor is present");
        }
        if (!draws_.empty() && !cost_.covers(max_draw_count()))
            report.push_back("cost table does not cover 1..max draw count");
        return report;
    }

    void require_valid() const {
        auto report = validate();
        if (report.empty())
            return;
        std::ostringstream msg;
        msg << "invalid PseudoMdp:";
        for (const auto& line : report)
            msg << "\n  " << line;
        throw std::invalid_argument(msg.str());
    }

  private:
    int num_sigma_ = 0;
    std::vector<Real> rewards_;
    std::vector<std::vector<Real>> joint_;
    std::vector<double> draws_;
    DrawCosts cost_ = DrawCosts::table({});
    std::optional<ShiftDescriptor> shift_;
};

/// One drawn (sigma', reward-index) pair.
struct ExPostOutcome {
    int sigma_to;
    int reward_index;

    bool operator==(const ExPostOutcome&) const = default;
};

/// Realized ex-post state: the full tuple of d(origin) drawn pairs.
struct ExPostState {
    int origin = 0;
    std::vector<ExPostOutcome> outcomes;

    int draw_count() const { return static_cast<int>(outcomes.size()); }

    /// Outcome of 1-based draw index a.
    const ExPostOutcome& outcome(std::int64_t a) const {
        return outcomes[static_cast<std::size_t>(a - 1)];
    }

    bool operator==(const ExPostState&) const = default;
};

namespace detail {

/// Uniform double in [0, 1) from any full-range 64-bit generator.
template <class Rng> inline double uniform01(Rng& rng) {
    static_assert(Rng::min() == 0 &&
                      Rng::max() == ~static_cast<std::uint64_t>(0),
                  "uniform01 requires a full-range 64-bit generator");
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace detail

/// Cached inverse-cdf sampler over the joint rows of a PseudoMdp.
class JointSampler {
  public:
    explicit JointSampler(const PseudoMdp& pmdp) {
        cumulative_.reserve(pmdp.num_sigma());
        for (int s = 0; s < pmdp.num_sigma(); ++s) {
            std::vector<Real> cum(pmdp.joint_row(s).size());
            Real run = 0;
            for (std::size_t i = 0; i < cum.size(); ++i) {
                run += pmdp.joint_row(s)[i];
                cum[i] = run;
            }
            cumulative_.push_back(std::move(cum));
        }
    }

    /// Draws one pair index from P(. | sigma).
    template <class Rng> int sample_pair(int sigma, Rng& rng) const {
        const auto& cum = cumulative_[sigma];
        const double u = detail::uniform01(rng);
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        if (it == cum.end())
            --it;
        return static_cast<int>(it - cum.begin());
    }

  private:
    std::vector<std::vector<Real>> cumulative_;
};

/// Samples a full ex-post state: d(sigma) IID pairs from the joint row.
/// Deterministic for a fixed generator state.
template <class Rng>
ExPostState sample_ex_post(const PseudoMdp& pmdp, int sigma, Rng& rng) {
    if (sigma < 0 || sigma >= pmdp.num_sigma())
        throw std::invalid_argument("sample_ex_post: sigma out of range");
    const double d = pmdp.draw_count(sigma);
    if (d > 0x1.0p31)
        throw std::invalid_argument(
            "sample_ex_post: draw count too large to materialize; sample "
            "with a cap upstream");
    JointSampler sampler(pmdp);
    ExPostState state;
    state.origin = sigma;
    const auto count = static_cast<std::int64_t>(d);
    state.outcomes.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        const int pair = sampler.sample_pair(sigma, rng);
        state.outcomes.push_back(
            {pmdp.pair_sigma(pair), pmdp.pair_reward_index(pair)});
    }
    return state;
}

} // namespace pmdp
