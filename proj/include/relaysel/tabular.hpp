#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "algorithm.hpp"
#include "env.hpp"
#include "rng.hpp"

namespace relaysel::tabular {

// Dense Q-table, states x actions, zero-initialised.
class QTable {
public:
    QTable(std::size_t states, std::size_t actions) : states_(states), actions_(actions), q_(states * actions, 0.0) {}

    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }

    double& operator()(std::size_t s, std::size_t a) { return q_.at(s * actions_ + a); }
    double operator()(std::size_t s, std::size_t a) const { return q_.at(s * actions_ + a); }

    double max(std::size_t s) const { return (*this)(s, greedy(s)); }

    // Lowest index among the best; `allowed` restricts the candidates if given.
    std::size_t greedy(std::size_t s, const std::vector<bool>* allowed = nullptr) const {
        std::size_t best = actions_;
        for (std::size_t a = 0; a < actions_; ++a) {
            if (allowed && !(*allowed)[a])
                continue;
            if (best == actions_ || (*this)(s, a) > (*this)(s, best))
                best = a;
        }
        if (best == actions_)
            throw std::logic_error("no allowed action");
        return best;
    }

    bool operator==(const QTable&) const = default;

private:
    std::size_t states_;
    std::size_t actions_;
    std::vector<double> q_;
};

struct Transition {
    std::size_t s = 0;
    std::size_t a = 0;
    double r = 0.0;
    std::size_t s_next = 0;
    std::optional<std::size_t> a_next; ///< required for Sarsa
};

// One-step backup: Q(s,a) += step * (r + delta * next - Q(s,a)), where next is
// max_a' Q(s',a') for Q-learning and Q(s',a_next) for Sarsa.
inline void tabular_update(QTable& table, const Transition& tr, Algorithm algorithm, double step, double delta) {
    double next = 0.0;
    if (algorithm == Algorithm::sarsa) {
        if (!tr.a_next)
            throw std::invalid_argument("Sarsa update needs the next action");
        next = table(tr.s_next, *tr.a_next);
    } else {
        next = table.max(tr.s_next);
    }
    double& q = table(tr.s, tr.a);
    q += step * (tr.r + delta * next - q);
}

// Mixed-radix index of (lengths, codes): relay k contributes
// (l_k * 4 + c_k - 1) * (4(L+1))^k. There are (4(L+1))^K states.
inline std::size_t state_index(const std::vector<std::size_t>& lengths, const std::vector<RelayCode>& codes,
                               std::size_t buffer_size) {
    const std::size_t radix = 4 * (buffer_size + 1);
    std::size_t idx = 0;
    for (std::size_t k = lengths.size(); k-- > 0;)
        idx = idx * radix + lengths[k] * 4 + static_cast<std::size_t>(static_cast<int>(codes[k]) - 1);
    return idx;
}

inline std::size_t state_count(std::size_t relays, std::size_t buffer_size) {
    std::size_t n = 1;
    for (std::size_t k = 0; k < relays; ++k)
        n *= 4 * (buffer_size + 1);
    return n;
}

inline std::size_t state_index(const EnvState& s, const EnvConfig& cfg) {
    std::vector<std::size_t> lengths;
    for (const auto& b : s.buffers)
        lengths.push_back(b.size());
    return state_index(lengths, relay_codes(s, cfg), cfg.buffer_size);
}

struct TabularConfig {
    Algorithm algorithm = Algorithm::q_learning;
    double step = 0.1;
    double delta = 0.9;
    double eps = 0.2;
    std::size_t slots = 100000;
};

// Epsilon-greedy tabular learning on a small environment, selection masked
// to valid actions. Only practical when (4(L+1))^K is small.
inline QTable train_on_env(const EnvConfig& env_cfg, const TabularConfig& cfg, Rng& env_rng, Rng& agent_rng) {
    EnvConfig ec = env_cfg;
    ec.mode = InvalidActionMode::masked;
    QTable table(state_count(ec.relays(), ec.buffer_size), ec.num_actions());
    EnvState state = reset(ec, env_rng);

    auto choose = [&](std::size_t si, const ActionMask& mask) {
        if (agent_rng.uniform01() < cfg.eps) {
            std::vector<std::size_t> candidates;
            for (std::size_t i = 0; i < mask.size(); ++i)
                if (mask[i])
                    candidates.push_back(i);
            return candidates[agent_rng.uniform_index(candidates.size())];
        }
        return table.greedy(si, &mask);
    };

    std::size_t s = state_index(state, ec);
    std::size_t a = choose(s, valid_action_mask(state, ec));
    for (std::size_t n = 0; n < cfg.slots; ++n) {
        const auto out = step(state, Action::from_index(a, ec.relays()), ec, env_rng);
        const std::size_t s_next = state_index(state, ec);
        const std::size_t a_next = choose(s_next, valid_action_mask(state, ec));
        tabular_update(table, Transition{s, a, out.reward, s_next, a_next}, cfg.algorithm, cfg.step, cfg.delta);
        s = s_next;
        a = a_next;
    }
    return table;
}

} // namespace relaysel::tabular
