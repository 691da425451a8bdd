#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. None of these go through the library's own fast paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <relaysel/agents.hpp>
#include <relaysel/env.hpp>
#include <relaysel/nn.hpp>
#include <relaysel/tabular.hpp>

namespace oracles {

using namespace relaysel;

// Plain-loop forward pass, independent of the Eigen path.
inline std::vector<double> reference_forward(const nn::Network& net, std::vector<double> h) {
    for (const auto& l : net.layers()) {
        std::vector<double> z(l.out(), 0.0);
        for (std::size_t r = 0; r < l.out(); ++r) {
            double acc = l.bias(static_cast<Eigen::Index>(r));
            for (std::size_t c = 0; c < l.in(); ++c)
                acc += l.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * h[c];
            z[r] = l.activation == nn::Activation::relu ? std::max(acc, 0.0) : acc;
        }
        h = std::move(z);
    }
    return h;
}

inline double reference_loss(const nn::Network& net, const std::vector<nn::TargetSpec>& batch) {
    double loss = 0.0;
    for (const auto& s : batch) {
        const auto q = reference_forward(net, s.state);
        loss += (s.target - q[s.action]) * (s.target - q[s.action]);
        for (auto m : s.zero_mask)
            loss += q[m] * q[m];
    }
    return loss;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v)
        x = 2.0 * rng.uniform01() - 1.0;
    return v;
}

inline std::vector<nn::TargetSpec> random_batch(const nn::Network& net, std::size_t n, Rng& rng, bool with_masks) {
    std::vector<nn::TargetSpec> batch;
    for (std::size_t i = 0; i < n; ++i) {
        nn::TargetSpec s;
        s.state = random_vector(net.input_dim(), rng);
        s.action = rng.uniform_index(net.output_dim());
        s.target = 3.0 * rng.uniform01() - 1.0;
        if (with_masks)
            for (std::size_t a = 0; a < net.output_dim(); ++a)
                if (a != s.action && rng.uniform01() < 0.4)
                    s.zero_mask.push_back(a);
        batch.push_back(std::move(s));
    }
    return batch;
}

// Biases pushed away from zero so relu kinks are not hit by the finite difference.
inline nn::Network random_net(const std::vector<std::size_t>& sizes, Rng& rng) {
    auto net = nn::Network::random(sizes, rng);
    for (auto& l : net.layers())
        for (Eigen::Index i = 0; i < l.bias.size(); ++i)
            l.bias(i) = 0.5 * (2.0 * rng.uniform01() - 1.0);
    return net;
}

// Worst relative error between the analytic gradient and central differences
// of reference_loss.
inline double max_relative_gradient_error(nn::Network net, const std::vector<nn::TargetSpec>& batch) {
    const auto analytic = nn::loss_and_gradient(net, batch).grads;
    const double h = 1e-6;
    double worst = 0.0;
    auto check = [&](double& param, double grad) {
        const double saved = param;
        param = saved + h;
        const double up = reference_loss(net, batch);
        param = saved - h;
        const double down = reference_loss(net, batch);
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(grad), 1e-3});
        worst = std::max(worst, std::abs(numeric - grad) / denom);
    };
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& l = net.layers()[i];
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                check(l.weight(r, c), analytic.weight[i](r, c));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r)
            check(l.bias(r), analytic.bias[i](r));
    }
    return worst;
}

// 20 random nets and batches with zero-target masks.
inline double gradient_check_suite(std::uint64_t seed = 2024) {
    Rng rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto net = random_net({5, 6, 6, 4}, rng);
        const auto batch = random_batch(net, 8, rng, true);
        worst = std::max(worst, max_relative_gradient_error(net, batch));
    }
    return worst;
}

// Worst deviation of the first Adam step from lr * g / (|g| + eps), over
// several constant gradients.
inline double adam_first_step_error(double lr) {
    double worst = 0.0;
    for (double g : {0.37, -2.5, 1e-3, 40.0}) {
        Rng rng(1);
        auto net = random_net({3, 4, 2}, rng);
        const auto original = net;
        nn::AdamState opt(net);
        auto grads = nn::Gradients::zeros_like(net);
        for (auto& w : grads.weight)
            w.setConstant(g);
        for (auto& b : grads.bias)
            b.setConstant(g);
        nn::adam_step(net, grads, opt, lr);
        const double want = lr * g / (std::abs(g) + 1e-8);
        for (std::size_t i = 0; i < net.layers().size(); ++i) {
            const Eigen::MatrixXd dw = original.layers()[i].weight - net.layers()[i].weight;
            const Eigen::VectorXd db = original.layers()[i].bias - net.layers()[i].bias;
            worst = std::max(worst, (dw.array() - want).abs().maxCoeff());
            worst = std::max(worst, (db.array() - want).abs().maxCoeff());
        }
    }
    return worst;
}

// Minimises (w + b - 3)^2 through the library on a 1x1 linear net and through
// scalar Adam written out by hand; returns the worst parameter deviation over
// 100 steps.
inline double adam_trajectory_error(double lr = 0.05) {
    auto net = nn::Network::zeros({1, 1});
    nn::AdamState opt(net);
    const std::vector<nn::TargetSpec> batch{{{1.0}, 0, 3.0, {}}};
    double w = 0.0, b = 0.0, mw = 0.0, vw = 0.0, mb = 0.0, vb = 0.0;
    double worst = 0.0;
    for (int t = 1; t <= 100; ++t) {
        const auto lg = nn::loss_and_gradient(net, batch);
        nn::adam_step(net, lg.grads, opt, lr);
        const double g = 2.0 * (w + b - 3.0);
        mw = 0.9 * mw + 0.1 * g;
        vw = 0.999 * vw + 0.001 * g * g;
        mb = 0.9 * mb + 0.1 * g;
        vb = 0.999 * vb + 0.001 * g * g;
        const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
        w -= lr * (mw / c1) / (std::sqrt(vw / c2) + 1e-8);
        b -= lr * (mb / c1) / (std::sqrt(vb / c2) + 1e-8);
        worst = std::max(worst, std::abs(net.layers()[0].weight(0, 0) - w));
        worst = std::max(worst, std::abs(net.layers()[0].bias(0) - b));
    }
    return worst;
}

// Max throughput over every action sequence of a horizon, by exhaustive
// enumeration of a hand-rolled K=1, L=1, always-on model (no library code).
inline double brute_force_best_throughput(int horizon, Slot delay_target) {
    int best = 0;
    int total = 1;
    for (int i = 0; i < horizon; ++i)
        total *= 3;
    for (int code = 0; code < total; ++code) {
        int c = code;
        bool held = false;
        Slot origin = 0;
        int delivered = 0;
        bool feasible = true;
        for (int t = 0; t < horizon && feasible; ++t) {
            const int a = c % 3;
            c /= 3;
            if (a == 1) {
                if (held)
                    feasible = false;
                held = true;
                origin = t;
            } else if (a == 2) {
                if (!held)
                    feasible = false;
                held = false;
                if (t - origin + 1 <= delay_target)
                    ++delivered;
            }
        }
        if (feasible)
            best = std::max(best, delivered);
    }
    return static_cast<double>(best) / horizon;
}

// Deterministic 3-state, 2-action MDP.
struct ChainMdp {
    std::array<std::array<std::size_t, 2>, 3> next{{{1, 2}, {0, 2}, {2, 0}}};
    std::array<std::array<double, 2>, 3> reward{{{0.0, 1.0}, {2.0, -1.0}, {0.5, 0.0}}};

    std::array<std::array<double, 2>, 3> value_iteration(double delta) const {
        std::array<std::array<double, 2>, 3> q{};
        for (int it = 0; it < 5000; ++it) {
            auto n = q;
            for (std::size_t s = 0; s < 3; ++s)
                for (std::size_t a = 0; a < 2; ++a) {
                    const auto sn = next[s][a];
                    n[s][a] = reward[s][a] + delta * std::max(q[sn][0], q[sn][1]);
                }
            q = n;
        }
        return q;
    }
};

// Sweeps tabular Q-learning over every (s, a) of the chain; returns the worst
// gap to the value-iteration fixed point.
inline double tabular_chain_error(double delta = 0.9) {
    const ChainMdp mdp;
    const auto oracle = mdp.value_iteration(delta);
    tabular::QTable t(3, 2);
    for (int sweep = 0; sweep < 2000; ++sweep)
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t a = 0; a < 2; ++a)
                tabular::tabular_update(t, tabular::Transition{s, a, mdp.reward[s][a], mdp.next[s][a], std::nullopt},
                                        Algorithm::q_learning, 0.5, delta);
    double worst = 0.0;
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 2; ++a)
            worst = std::max(worst, std::abs(t(s, a) - oracle[s][a]));
    return worst;
}

inline EnvConfig toy_env() {
    EnvConfig cfg{Topology::equidistant(1, 5.0, 3.0, 1e5), 1, 8.0, 6};
    cfg.fading = Fading::constant;
    return cfg;
}

// Enumerates every deterministic policy over the two reachable states of the
// toy instance, then trains tabular Sarsa or Q-learning on it and compares the
// greedy policy with the best enumerated one.
inline std::optional<std::string> tabular_toy_mismatch(Algorithm algorithm) {
    const auto cfg = toy_env();
    Rng probe_rng(1);
    const EnvState empty = reset(cfg, probe_rng);
    EnvState full = empty;
    full.buffers[0].push(Packet{0, 0});

    std::vector<std::size_t> empty_actions, full_actions;
    for (const auto& a : valid_action_set(empty, cfg))
        empty_actions.push_back(a.index(cfg.relays()));
    for (const auto& a : valid_action_set(full, cfg))
        full_actions.push_back(a.index(cfg.relays()));
    double best = -1.0;
    std::size_t best_empty = 0, best_full = 0;
    for (std::size_t a_empty : empty_actions)
        for (std::size_t a_full : full_actions) {
            Policy p = [&cfg, a_empty, a_full](const EnvState& s) {
                return Action::from_index(s.buffers[0].empty() ? a_empty : a_full, cfg.relays());
            };
            Rng rng(3);
            const double thr = evaluate_policy(p, cfg, 1000, rng);
            if (thr > best + 1e-12) {
                best = thr;
                best_empty = a_empty;
                best_full = a_full;
            }
        }
    if (std::abs(best - brute_force_best_throughput(12, cfg.delay_target)) > 1e-3)
        return "best stationary policy misses the enumerated optimum";

    tabular::TabularConfig tc;
    tc.algorithm = algorithm;
    tc.slots = 20000;
    Rng env_rng(11), agent_rng(12);
    const auto table = tabular::train_on_env(cfg, tc, env_rng, agent_rng);
    const auto m_empty = valid_action_mask(empty, cfg);
    const auto m_full = valid_action_mask(full, cfg);
    if (table.greedy(tabular::state_index(empty, cfg), &m_empty) != best_empty)
        return "greedy action with an empty buffer differs from the optimum";
    if (table.greedy(tabular::state_index(full, cfg), &m_full) != best_full)
        return "greedy action with a full buffer differs from the optimum";
    return std::nullopt;
}

// Checks the environment over a random rollout: buffer bounds, conservation,
// per-relay FIFO delivery, delay >= 2, no invalid outcome when masked and
// throughput <= 0.5. Returns the first violation found.
inline std::optional<std::string> rollout_violation(const EnvConfig& cfg, std::int64_t slots, std::uint64_t seed) {
    Rng rng(seed), pick(seed + 1);
    EnvState s = reset(cfg, rng);
    std::map<std::size_t, std::vector<std::uint64_t>> enqueued, delivered;
    std::int64_t in = 0, out = 0, rewarded = 0;
    const bool masked = cfg.mode == InvalidActionMode::masked;
    for (std::int64_t n = 0; n < slots; ++n) {
        Action a = Action::none();
        if (masked) {
            const auto valid = valid_action_set(s, cfg);
            a = valid[pick.uniform_index(valid.size())];
        } else {
            a = Action::from_index(pick.uniform_index(cfg.num_actions()), cfg.relays());
        }
        const std::uint64_t seq = s.next_seq;
        const auto o = step(s, a, cfg, rng);
        if (masked && o.action_class == ActionClass::invalid)
            return "invalid outcome in masked mode at slot " + std::to_string(n);
        if (a.kind() == Action::Kind::source_to_relay && o.action_class != ActionClass::invalid) {
            enqueued[a.relay()].push_back(seq);
            ++in;
        }
        if (o.delivered) {
            if (o.delivered->delay < 2)
                return "delay below 2 at slot " + std::to_string(n);
            delivered[o.delivered->relay].push_back(o.delivered->seq);
            ++out;
        }
        rewarded += o.action_class == ActionClass::rewarded;
        std::int64_t total = 0;
        for (const auto& b : s.buffers) {
            if (b.size() > cfg.buffer_size)
                return "buffer over capacity at slot " + std::to_string(n);
            total += static_cast<std::int64_t>(b.size());
        }
        if (total != in - out)
            return "packet count not conserved at slot " + std::to_string(n);
    }
    for (const auto& [k, seqs] : delivered) {
        const auto& enq = enqueued[k];
        if (seqs.size() > enq.size() || !std::equal(seqs.begin(), seqs.end(), enq.begin()))
            return "relay " + std::to_string(k) + " delivered out of FIFO order";
    }
    if (static_cast<double>(rewarded) / static_cast<double>(slots) > 0.5)
        return "throughput above 0.5";
    return std::nullopt;
}

} // namespace oracles
