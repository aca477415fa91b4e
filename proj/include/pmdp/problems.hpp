#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmdp/pseudo_mdp.hpp"

namespace pmdp {

/// Four-color drawing game. Ex-ante states are the colors club, spade,
/// diamond, heart (in that order); holding color sigma deals 2^sigma cards.
/// Rewards are the card values 1..10, a card's color is its successor
/// state, and keeping the a-th card costs 6 + a. Every color and value is
/// equally likely except value 10, which appears on four cards per color.
inline PseudoMdp card_game_pmdp() {
    const int colors = 4;
    std::vector<Real> rewards(10);
    for (int v = 0; v < 10; ++v)
        rewards[v] = v + 1;
    std::vector<std::vector<Real>> joint(
        colors, std::vector<Real>(colors * 10));
    for (auto& row : joint)
        for (int color = 0; color < colors; ++color)
            for (int v = 0; v < 10; ++v)
                row[color * 10 + v] = (v == 9 ? 4.0 : 1.0) / 52.0;
    std::vector<double> draws(colors);
    for (int sigma = 0; sigma < colors; ++sigma)
        draws[sigma] = std::exp2(sigma);
    return PseudoMdp(colors, std::move(rewards), std::move(joint),
                     std::move(draws), DrawCosts::linear(6, 1),
                     ShiftDescriptor{ShiftDescriptor::Kind::linear, 1});
}

inline const char* card_color_name(int sigma) {
    constexpr const char* names[] = {"club", "spade", "diamond", "heart"};
    return sigma >= 0 && sigma < 4 ? names[sigma] : "unknown";
}

/// Binomial(n, p) probability of k successes, computed in log space so
/// large n stays finite.
inline double binomial_pmf(int n, double p, int k) {
    if (k < 0 || k > n)
        return 0.0;
    if (p <= 0.0)
        return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0)
        return k == n ? 1.0 : 0.0;
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                              std::lgamma(n - k + 1.0);
    return std::exp(log_choose + k * std::log(p) +
                    (n - k) * std::log1p(-p));
}

/// Joint law of (T, N) for one round with kappa slots at adversary share p:
/// N ~ Binomial(kappa, p) adversary slots overall, T the length of the
/// adversary-held tail. P(T=t, N=n) = C(kappa-t-1, n-t) p^n (1-p)^(kappa-n)
/// for t < kappa (tail of t adversary slots, then one honest slot, then
/// n-t adversary slots among the first kappa-t-1), and P(kappa, kappa) =
/// p^kappa. Entries indexed [t][n], t and n in 0..kappa.
inline std::vector<std::vector<double>> lra_joint_distribution(int kappa,
                                                               double p) {
    if (kappa < 1)
        throw std::invalid_argument("lra_joint_distribution: kappa >= 1");
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument(
            "lra_joint_distribution: stake must lie strictly in (0, 1)");
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    std::vector<std::vector<double>> joint(
        kappa + 1, std::vector<double>(kappa + 1, 0.0));
    for (int t = 0; t < kappa; ++t) {
        const int free_slots = kappa - t - 1; // before the honest closer
        for (int n = t; n <= t + free_slots; ++n) {
            const double log_choose = std::lgamma(free_slots + 1.0) -
                                      std::lgamma(n - t + 1.0) -
                                      std::lgamma(free_slots - (n - t) + 1.0);
            joint[t][n] =
                std::exp(log_choose + n * log_p + (kappa - n) * log_q);
        }
    }
    joint[kappa][kappa] = std::exp(kappa * log_p);
    return joint;
}

struct LraSpec {
    int kappa = 32;
    double stake = 0.2;
    /// Largest modeled tail length; rounds with longer tails are clamped to
    /// it (their draws and successor states are truncated). Negative means
    /// the full kappa.
    int sigma_max = -1;
};

/// Last-revealer randomness manipulation as a pseudo MDP. Ex-ante state
/// sigma is the adversary tail length of the previous round, giving
/// 2^sigma candidate reveal subsets; candidate a costs popcount(a-1)
/// withheld reveals, earns the adversary slot count N of the resulting
/// round, and moves to that round's tail length T.
inline PseudoMdp lra_pmdp(const LraSpec& spec) {
    if (spec.kappa < 1 || spec.kappa > 1023)
        throw std::invalid_argument(
            "lra_pmdp: kappa must lie in [1, 1023] so 2^kappa stays a "
            "finite draw count");
    const int sigma_max = spec.sigma_max < 0 ? spec.kappa : spec.sigma_max;
    if (sigma_max < 1 || sigma_max > spec.kappa)
        throw std::invalid_argument(
            "lra_pmdp: sigma_max must lie in [1, kappa]");

    const auto full = lra_joint_distribution(spec.kappa, spec.stake);
    const int num_sigma = sigma_max + 1;
    const int num_rewards = spec.kappa + 1;
    std::vector<Real> rewards(num_rewards);
    for (int n = 0; n <= spec.kappa; ++n)
        rewards[n] = n;

    // One row shared by every sigma: the next round's law ignores the
    // current tail. Tails beyond sigma_max collapse onto sigma_max.
    std::vector<Real> row(
        static_cast<std::size_t>(num_sigma) * num_rewards, Real(0));
    for (int t = 0; t <= spec.kappa; ++t) {
        const int clamped = std::min(t, sigma_max);
        for (int n = 0; n <= spec.kappa; ++n)
            row[static_cast<std::size_t>(clamped) * num_rewards + n] +=
                full[t][n];
    }
    Real total = 0;
    for (Real v : row)
        total += v;
    for (Real& v : row)
        v /= total; // remove the ~1e-15 float slack so rows validate

    std::vector<std::vector<Real>> joint(num_sigma, row);
    std::vector<double> draws(num_sigma);
    for (int sigma = 0; sigma < num_sigma; ++sigma)
        draws[sigma] = std::exp2(sigma);
    return PseudoMdp(num_sigma, std::move(rewards), std::move(joint),
                     std::move(draws), DrawCosts::popcount_form(0, 1),
                     ShiftDescriptor{ShiftDescriptor::Kind::constant, 1});
}

/// Expected per-round adversary slots without manipulation.
inline double lra_honest_baseline(int kappa, double stake) {
    return kappa * stake;
}

/// Normalizes a per-round gain g to the fraction of all kappa slots gained
/// beyond the stake-proportional share: (g - kappa p) / kappa.
inline double lra_normalized_gain(double gain_per_round, int kappa,
                                  double stake) {
    return (gain_per_round - kappa * stake) / kappa;
}

} // namespace pmdp
