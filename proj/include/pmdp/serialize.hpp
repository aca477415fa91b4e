#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmdp/mdp.hpp"
#include "pmdp/pseudo_mdp.hpp"

namespace pmdp {

/// {"states", "actions" (count per state), "transition" (row per (s,a), in
/// state-major order), "reward" (one per (s,a) row)}.
inline nlohmann::json finite_mdp_to_json(const FiniteMdp& mdp) {
    nlohmann::json j;
    j["states"] = mdp.num_states();
    std::vector<int> actions(static_cast<std::size_t>(mdp.num_states()));
    nlohmann::json transition = nlohmann::json::array();
    nlohmann::json reward = nlohmann::json::array();
    for (int s = 0; s < mdp.num_states(); ++s) {
        actions[static_cast<std::size_t>(s)] = mdp.num_actions(s);
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const Real* row = mdp.transition_row(s, a);
            transition.push_back(std::vector<Real>(
                row, row + mdp.num_states()));
            reward.push_back(mdp.reward(s, a));
        }
    }
    j["actions"] = actions;
    j["transition"] = std::move(transition);
    j["reward"] = std::move(reward);
    return j;
}

inline FiniteMdp finite_mdp_from_json(const nlohmann::json& j) {
    const int n = j.at("states").get<int>();
    const auto actions = j.at("actions").get<std::vector<int>>();
    if (static_cast<int>(actions.size()) != n)
        throw std::invalid_argument(
            "finite_mdp_from_json: one action count per state required");
    FiniteMdp mdp(n, actions);
    const auto& transition = j.at("transition");
    const auto reward = j.at("reward").get<std::vector<Real>>();
    std::size_t row = 0;
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < actions[static_cast<std::size_t>(s)]; ++a, ++row) {
            if (row >= transition.size() || row >= reward.size())
                throw std::invalid_argument(
                    "finite_mdp_from_json: too few transition/reward rows");
            const auto probs = transition[row].get<std::vector<Real>>();
            if (static_cast<int>(probs.size()) != n)
                throw std::invalid_argument(
                    "finite_mdp_from_json: transition row length mismatch");
            mdp.reward(s, a) = reward[row];
            for (int to = 0; to < n; ++to)
                mdp.transition(s, a, to) = probs[static_cast<std::size_t>(to)];
        }
    }
    if (row != transition.size() || row != reward.size())
        throw std::invalid_argument(
            "finite_mdp_from_json: extra transition/reward rows");
    mdp.require_valid();
    return mdp;
}

inline nlohmann::json cost_to_json(const DrawCosts& cost) {
    switch (cost.form()) {
    case DrawCosts::Form::table:
        return cost.table_values();
    case DrawCosts::Form::linear:
        return {{"kind", "linear"}, {"c0", cost.param0()},
                {"c1", cost.param1()}};
    case DrawCosts::Form::popcount:
        return {{"kind", "popcount"}, {"base", cost.param0()},
                {"step", cost.param1()}};
    }
    throw std::logic_error("cost_to_json: unknown form");
}

inline DrawCosts cost_from_json(const nlohmann::json& j) {
    if (j.is_array())
        return DrawCosts::table(j.get<std::vector<Real>>());
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear")
        return DrawCosts::linear(j.at("c0").get<Real>(),
                                 j.at("c1").get<Real>());
    if (kind == "popcount")
        return DrawCosts::popcount_form(j.at("base").get<Real>(),
                                        j.at("step").get<Real>());
    throw std::invalid_argument("cost_from_json: unknown cost kind " + kind);
}

/// {"sigma", "rewards", "joint" (row per sigma over dense pairs), "draws",
/// "cost" (table array or closed-form object), "shift" (null or
/// {"kind","parameter"})}.
inline nlohmann::json pseudo_mdp_to_json(const PseudoMdp& pmdp) {
    nlohmann::json j;
    j["sigma"] = pmdp.num_sigma();
    j["rewards"] = pmdp.rewards();
    nlohmann::json joint = nlohmann::json::array();
    for (int s = 0; s < pmdp.num_sigma(); ++s)
        joint.push_back(pmdp.joint_row(s));
    j["joint"] = std::move(joint);
    j["draws"] = pmdp.draw_counts();
    j["cost"] = cost_to_json(pmdp.cost());
    if (pmdp.shift().has_value())
        j["shift"] = {{"kind", pmdp.shift()->kind ==
                                       ShiftDescriptor::Kind::constant
                                   ? "constant"
                                   : "linear"},
                      {"parameter", pmdp.shift()->parameter}};
    else
        j["shift"] = nullptr;
    return j;
}

inline PseudoMdp pseudo_mdp_from_json(const nlohmann::json& j) {
    const int num_sigma = j.at("sigma").get<int>();
    auto rewards = j.at("rewards").get<std::vector<Real>>();
    auto joint = j.at("joint").get<std::vector<std::vector<Real>>>();
    auto draws = j.at("draws").get<std::vector<double>>();
    auto cost = cost_from_json(j.at("cost"));
    std::optional<ShiftDescriptor> shift;
    if (j.contains("shift") && !j.at("shift").is_null()) {
        const auto kind = j.at("shift").at("kind").get<std::string>();
        ShiftDescriptor descriptor;
        if (kind == "constant")
            descriptor.kind = ShiftDescriptor::Kind::constant;
        else if (kind == "linear")
            descriptor.kind = ShiftDescriptor::Kind::linear;
        else
            throw std::invalid_argument(
                "pseudo_mdp_from_json: unknown shift kind " + kind);
        descriptor.parameter = j.at("shift").at("parameter").get<Real>();
        shift = descriptor;
    }
    PseudoMdp pmdp(num_sigma, std::move(rewards), std::move(joint),
                   std::move(draws), std::move(cost), shift);
    pmdp.require_valid();
    return pmdp;
}

} // namespace pmdp
