#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "channel.hpp"
#include "rng.hpp"

namespace relaysel {

using Slot = std::int64_t;

struct Packet {
    Slot origin_slot = 0;  ///< slot of the S->R transmission
    std::uint64_t seq = 0; ///< source sequence number, for ordering checks
};

// Finite FIFO queue at one relay.
class RelayBuffer {
public:
    explicit RelayBuffer(std::size_t capacity) : capacity_(capacity) {}

    std::size_t size() const { return queue_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return queue_.empty(); }
    bool full() const { return queue_.size() >= capacity_; }
    const Packet& front() const { return queue_.front(); }

    void push(Packet p) {
        if (full())
            throw std::logic_error("push on full relay buffer");
        queue_.push_back(p);
    }

    Packet pop() {
        if (empty())
            throw std::logic_error("pop on empty relay buffer");
        Packet p = queue_.front();
        queue_.pop_front();
        return p;
    }

    bool operator==(const RelayBuffer& o) const {
        if (capacity_ != o.capacity_ || queue_.size() != o.queue_.size())
            return false;
        for (std::size_t i = 0; i < queue_.size(); ++i)
            if (queue_[i].origin_slot != o.queue_[i].origin_slot || queue_[i].seq != o.queue_[i].seq)
                return false;
        return true;
    }

private:
    std::deque<Packet> queue_;
    std::size_t capacity_;
};

enum class InvalidActionMode {
    masked,    ///< selecting an invalid action is a caller bug
    punishable ///< invalid actions are accepted, rewarded -1, and change nothing
};

struct EnvConfig {
    Topology topology;
    std::size_t buffer_size = 10; ///< L
    double eta = 8.0;             ///< target rate, bits/s/Hz
    Slot delay_target = 6;        ///< Delta_o, slots (inclusive deadline)
    InvalidActionMode mode = InvalidActionMode::masked;
    Fading fading = Fading::rayleigh;

    std::size_t relays() const { return topology.relays(); }
    std::size_t num_actions() const { return 2 * relays() + 1; }
    std::size_t state_dim() const { return 5 * relays(); }

    void validate() const {
        if (buffer_size < 1)
            throw std::invalid_argument("buffer size must be >= 1");
        if (delay_target < 2)
            throw std::invalid_argument("target delay must be >= 2 slots");
        if (!(eta > 0.0))
            throw std::invalid_argument("target rate must be positive");
    }
};

// One of 2K+1 link decisions. Canonical index: none -> 0,
// source->relay k -> 1+k, relay k->destination -> 1+K+k (k zero-based).
class Action {
public:
    enum class Kind { none, source_to_relay, relay_to_dest };

    static Action none() { return Action(Kind::none, 0); }
    static Action source_to_relay(std::size_t k) { return Action(Kind::source_to_relay, k); }
    static Action relay_to_dest(std::size_t k) { return Action(Kind::relay_to_dest, k); }

    static Action from_index(std::size_t index, std::size_t relays) {
        if (index == 0)
            return none();
        if (index <= relays)
            return source_to_relay(index - 1);
        if (index <= 2 * relays)
            return relay_to_dest(index - 1 - relays);
        throw std::out_of_range("action index " + std::to_string(index) + " out of range");
    }

    std::size_t index(std::size_t relays) const {
        switch (kind_) {
        case Kind::none:
            return 0;
        case Kind::source_to_relay:
            return 1 + relay_;
        case Kind::relay_to_dest:
            return 1 + relays + relay_;
        }
        return 0;
    }

    Kind kind() const { return kind_; }
    std::size_t relay() const { return relay_; }

    bool operator==(const Action&) const = default;

private:
    Action(Kind kind, std::size_t relay) : kind_(kind), relay_(relay) {}
    Kind kind_;
    std::size_t relay_;
};

// Per-relay link validity code.
enum class RelayCode : int {
    source_link_only = 1,
    relay_link_only = 2,
    both = 3,
    neither = 4,
};

struct EnvState {
    Slot t = 0;
    std::vector<RelayBuffer> buffers;
    LinkGains gains;
    std::uint64_t next_seq = 0;
};

enum class ActionClass { rewarded, zero, invalid };

struct Delivery {
    std::size_t relay = 0;
    Slot delay = 0;
    std::uint64_t seq = 0;
};

struct StepOutcome {
    double reward = 0.0;
    std::optional<Delivery> delivered; ///< set for every successful R->D transmission
    ActionClass action_class = ActionClass::zero;
};

struct LinkValidity {
    bool source_link = false;
    bool relay_link = false;
};

inline LinkValidity link_validity(double sr_gain, double rd_gain, const RelayBuffer& buffer,
                                  std::size_t k, const EnvConfig& cfg) {
    const auto& topo = cfg.topology;
    LinkValidity v;
    v.source_link = !buffer.full() && !is_outage(link_capacity(sr_gain, topo.d_sr(k), topo), cfg.eta);
    v.relay_link = !buffer.empty() && !is_outage(link_capacity(rd_gain, topo.d_rd(k), topo), cfg.eta);
    return v;
}

inline RelayCode classify_relay(double sr_gain, double rd_gain, const RelayBuffer& buffer, std::size_t k,
                                const EnvConfig& cfg) {
    const auto v = link_validity(sr_gain, rd_gain, buffer, k, cfg);
    if (v.source_link && v.relay_link)
        return RelayCode::both;
    if (v.source_link)
        return RelayCode::source_link_only;
    if (v.relay_link)
        return RelayCode::relay_link_only;
    return RelayCode::neither;
}

inline std::vector<RelayCode> relay_codes(const EnvState& s, const EnvConfig& cfg) {
    std::vector<RelayCode> codes;
    codes.reserve(cfg.relays());
    for (std::size_t k = 0; k < cfg.relays(); ++k)
        codes.push_back(classify_relay(s.gains.sr[k], s.gains.rd[k], s.buffers[k], k, cfg));
    return codes;
}

using StateVector = std::vector<double>;

// [l_1/L .. l_K/L, onehot(c_1) .. onehot(c_K)], length 5K.
inline StateVector encode(const std::vector<std::size_t>& lengths, const std::vector<RelayCode>& codes,
                          std::size_t buffer_size) {
    const std::size_t relays = lengths.size();
    StateVector v(5 * relays, 0.0);
    for (std::size_t k = 0; k < relays; ++k) {
        v[k] = static_cast<double>(lengths[k]) / static_cast<double>(buffer_size);
        v[relays + 4 * k + (static_cast<int>(codes[k]) - 1)] = 1.0;
    }
    return v;
}

inline StateVector encode_state(const EnvState& s, const EnvConfig& cfg) {
    std::vector<std::size_t> lengths;
    for (const auto& b : s.buffers)
        lengths.push_back(b.size());
    return encode(lengths, relay_codes(s, cfg), cfg.buffer_size);
}

struct DecodedState {
    std::vector<std::size_t> lengths;
    std::vector<RelayCode> codes;
};

inline DecodedState decode_state(const StateVector& v, std::size_t buffer_size) {
    if (v.size() % 5 != 0)
        throw std::invalid_argument("state vector length is not a multiple of 5");
    const std::size_t relays = v.size() / 5;
    DecodedState d;
    for (std::size_t k = 0; k < relays; ++k) {
        d.lengths.push_back(static_cast<std::size_t>(std::lround(v[k] * static_cast<double>(buffer_size))));
        int code = 0;
        for (int c = 0; c < 4; ++c)
            if (v[relays + 4 * k + c] == 1.0)
                code = c + 1;
        if (code == 0)
            throw std::invalid_argument("state vector has no validity code for relay " + std::to_string(k));
        d.codes.push_back(static_cast<RelayCode>(code));
    }
    return d;
}

// mask[i] is true iff action i is selectable. The no-transmission action is always valid.
using ActionMask = std::vector<bool>;

inline ActionMask valid_action_mask(const EnvState& s, const EnvConfig& cfg) {
    const std::size_t relays = cfg.relays();
    ActionMask mask(cfg.num_actions(), false);
    mask[0] = true;
    for (std::size_t k = 0; k < relays; ++k) {
        const auto v = link_validity(s.gains.sr[k], s.gains.rd[k], s.buffers[k], k, cfg);
        mask[1 + k] = v.source_link;
        mask[1 + relays + k] = v.relay_link;
    }
    return mask;
}

inline std::vector<Action> valid_action_set(const EnvState& s, const EnvConfig& cfg) {
    const auto mask = valid_action_mask(s, cfg);
    std::vector<Action> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i])
            out.push_back(Action::from_index(i, cfg.relays()));
    return out;
}

inline EnvState reset(const EnvConfig& cfg, Rng& rng) {
    cfg.validate();
    EnvState s;
    s.buffers.assign(cfg.relays(), RelayBuffer(cfg.buffer_size));
    s.gains = sample_gains(rng, cfg.relays(), cfg.fading);
    return s;
}

// Applies one slot. The source is saturated. Gains are redrawn and t advances
// on every call, including invalid actions in punishable mode.
inline StepOutcome step(EnvState& s, Action a, const EnvConfig& cfg, Rng& rng) {
    const std::size_t relays = cfg.relays();
    if (a.kind() != Action::Kind::none && a.relay() >= relays)
        throw std::out_of_range("action relay index out of range");

    StepOutcome out;
    bool valid = true;
    if (a.kind() != Action::Kind::none) {
        const std::size_t k = a.relay();
        const auto v = link_validity(s.gains.sr[k], s.gains.rd[k], s.buffers[k], k, cfg);
        valid = a.kind() == Action::Kind::source_to_relay ? v.source_link : v.relay_link;
    }

    if (!valid) {
        if (cfg.mode == InvalidActionMode::masked)
            throw std::logic_error("invalid action " + std::to_string(a.index(relays)) +
                                   " selected in masked mode");
        out.action_class = ActionClass::invalid;
        out.reward = -1.0;
    } else if (a.kind() == Action::Kind::source_to_relay) {
        s.buffers[a.relay()].push(Packet{s.t, s.next_seq++});
    } else if (a.kind() == Action::Kind::relay_to_dest) {
        const Packet p = s.buffers[a.relay()].pop();
        const Slot delay = (s.t - p.origin_slot) + 1;
        out.delivered = Delivery{a.relay(), delay, p.seq};
        if (delay <= cfg.delay_target) {
            out.action_class = ActionClass::rewarded;
            out.reward = 1.0;
        }
    }

    ++s.t;
    s.gains = sample_gains(rng, relays, cfg.fading);
    return out;
}

using Policy = std::function<Action(const EnvState&)>;

// Delay-constrained throughput (rewarded deliveries per slot) of a fresh
// N-slot rollout from empty buffers.
inline double evaluate_policy(const Policy& policy, const EnvConfig& cfg, std::int64_t slots, Rng& rng) {
    if (slots < 1)
        throw std::invalid_argument("evaluation needs at least one slot");
    EnvState s = reset(cfg, rng);
    std::int64_t delivered = 0;
    for (std::int64_t n = 0; n < slots; ++n) {
        const auto out = step(s, policy(s), cfg, rng);
        if (out.action_class == ActionClass::rewarded)
            ++delivered;
    }
    return static_cast<double>(delivered) / static_cast<double>(slots);
}

} // namespace relaysel
