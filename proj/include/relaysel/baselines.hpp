#pragma once

#include <cstddef>
#include <vector>

#include "channel.hpp"
#include "env.hpp"
#include "rng.hpp"

namespace relaysel {

// Max-link: among buffer-available links (S->R_k with room, R_k->D with a
// packet) take the one with the highest received SNR; if that link is in
// outage, or nothing is available, transmit nothing. Ties go to the lowest
// action index.
inline Action max_link_select(const EnvState& s, const EnvConfig& cfg) {
    const auto& topo = cfg.topology;
    const std::size_t relays = cfg.relays();
    double best_snr = -1.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < relays; ++k) {
        if (!s.buffers[k].full()) {
            const double x = snr(s.gains.sr[k], topo.d_sr(k), topo);
            if (x > best_snr) {
                best_snr = x;
                best = 1 + k;
            }
        }
    }
    for (std::size_t k = 0; k < relays; ++k) {
        if (!s.buffers[k].empty()) {
            const double x = snr(s.gains.rd[k], topo.d_rd(k), topo);
            if (x > best_snr) {
                best_snr = x;
                best = 1 + relays + k;
            }
        }
    }
    if (best == 0 || is_outage(std::log2(1.0 + best_snr), cfg.eta))
        return Action::none();
    return Action::from_index(best, relays);
}

inline Policy max_link_policy(const EnvConfig& cfg) {
    return [cfg](const EnvState& s) { return max_link_select(s, cfg); };
}

// Uniform over the valid actions (including no transmission).
inline Policy random_valid_policy(const EnvConfig& cfg, Rng& rng) {
    return [cfg, &rng](const EnvState& s) {
        const auto valid = valid_action_set(s, cfg);
        return valid[rng.uniform_index(valid.size())];
    };
}

} // namespace relaysel
