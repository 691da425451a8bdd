#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "algorithm.hpp"
#include "env.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace relaysel {

struct TrainConfig {
    double delta = 0.9;        ///< discount factor
    double f = 0.999;          ///< epsilon decay factor
    double eps_min = 0.1;
    double lr = 0.001;         ///< Adam base step size
    std::size_t n_g = 500;     ///< experiences per generation phase
    std::size_t n_p = 32;      ///< replay batch size
    std::size_t n_e = 100;     ///< prediction updates per target sync
    std::size_t total_rounds = 40;
    Algorithm algorithm = Algorithm::sarsa;
    Assist assist = Assist::decision;
    std::uint64_t seed = 1;
    std::vector<std::size_t> hidden = {256, 256};
    std::int64_t eval_slots = 10000; ///< greedy rollout length per logged round
    bool record_time = true;         ///< false writes 0 seconds, for byte-stable logs

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("discount factor must be in (0, 1)");
        if (!(f > 0.0 && f < 1.0))
            throw std::invalid_argument("epsilon decay factor must be in (0, 1)");
        if (!(eps_min > 0.0 && eps_min < 1.0))
            throw std::invalid_argument("minimum epsilon must be in (0, 1)");
        if (!(lr > 0.0))
            throw std::invalid_argument("learning rate must be positive");
        if (n_g < 1 || n_p < 1 || n_e < 1)
            throw std::invalid_argument("N_g, N_p and N_e must be >= 1");
        if (n_p > n_g)
            throw std::invalid_argument("replay batch N_p cannot exceed N_g");
        if (eval_slots < 1)
            throw std::invalid_argument("evaluation slots must be >= 1");
    }
};

struct Metrics {
    std::size_t iteration = 0;       ///< prediction-network updates so far
    double throughput = 0.0;         ///< greedy delay-constrained throughput, packets/slot
    double loss = 0.0;               ///< mean training loss over the round
    double epsilon = 1.0;            ///< exploration rate of the last update
    double mean_abs_invalid_q = 0.0; ///< mean |Q| over invalid actions on the evaluation rollout
    double seconds = 0.0;            ///< wall clock since training start

    bool operator==(const Metrics&) const = default;
};

// max(f^(n-1), eps_min), n counted from 1.
inline double epsilon(std::size_t n_ite, double f, double eps_min) {
    if (n_ite < 1)
        throw std::invalid_argument("iteration count starts at 1");
    return std::max(std::pow(f, static_cast<double>(n_ite - 1)), eps_min);
}

inline Eigen::VectorXd q_values(const nn::Network& net, const StateVector& s) {
    return net.forward(Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())).eval());
}

// Lowest index wins ties. With masked set, only actions with mask[i] compete.
inline std::size_t greedy_action(const Eigen::VectorXd& q, const ActionMask& mask, bool masked) {
    std::size_t best = 0;
    bool found = false;
    for (std::size_t i = 0; i < static_cast<std::size_t>(q.size()); ++i) {
        if (masked && !mask[i])
            continue;
        if (!found || q(static_cast<Eigen::Index>(i)) > q(static_cast<Eigen::Index>(best))) {
            best = i;
            found = true;
        }
    }
    return best;
}

// Epsilon-greedy. The exploration coin is always drawn first.
inline std::size_t select_action(const nn::Network& net, const StateVector& s, const ActionMask& mask, double eps,
                                 Rng& rng, bool masked) {
    if (!mask.empty() && !mask[0])
        throw std::invalid_argument("the no-transmission action must always be valid");
    const std::size_t n = net.output_dim();
    if (rng.uniform01() < eps) {
        if (!masked)
            return rng.uniform_index(n);
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i])
                candidates.push_back(i);
        return candidates[rng.uniform_index(candidates.size())];
    }
    return greedy_action(q_values(net, s), mask, masked);
}

struct Experience {
    StateVector s;
    std::size_t a = 0;
    double r = 0.0;
    StateVector s_next;
    std::optional<std::size_t> a_next; ///< Sarsa only
    ActionMask valid_s;                ///< validity at s, recorded when the experience was made
    ActionMask valid_next;             ///< validity at s_next
};

// Live environment that persists across generation phases.
struct EnvRun {
    EnvConfig cfg;
    EnvState state;
    Rng rng;

    EnvRun(EnvConfig c, std::uint64_t seed) : cfg(std::move(c)), rng(seed) { state = reset(cfg, rng); }
};

// Runs `count` slots with the prediction network held fixed. Sarsa applies the
// action predicted at the previous slot; the first slot of a phase picks fresh.
inline std::vector<Experience> generate_experiences(EnvRun& env, const nn::Network& net, std::size_t count,
                                                    Algorithm algorithm, double eps, Rng& rng) {
    if (count < 1)
        throw std::invalid_argument("must generate at least one experience");
    const bool masked = env.cfg.mode == InvalidActionMode::masked;
    const std::size_t relays = env.cfg.relays();
    std::vector<Experience> out;
    out.reserve(count);

    StateVector s = encode_state(env.state, env.cfg);
    ActionMask mask = valid_action_mask(env.state, env.cfg);
    std::optional<std::size_t> pending;
    for (std::size_t t = 0; t < count; ++t) {
        Experience e;
        e.a = pending ? *pending : select_action(net, s, mask, eps, rng, masked);
        const auto outcome = step(env.state, Action::from_index(e.a, relays), env.cfg, env.rng);
        e.r = outcome.reward;
        e.s_next = encode_state(env.state, env.cfg);
        e.valid_next = valid_action_mask(env.state, env.cfg);
        if (algorithm == Algorithm::sarsa) {
            e.a_next = select_action(net, e.s_next, e.valid_next, eps, rng, masked);
            pending = e.a_next;
        }
        e.s = std::move(s);
        e.valid_s = std::move(mask);
        s = e.s_next;
        mask = e.valid_next;
        out.push_back(std::move(e));
    }
    return out;
}

// k distinct indices from [0, n), uniformly (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n)
        throw std::invalid_argument("cannot sample more items than available");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
        idx[i] = i;
    for (std::size_t i = 0; i < k; ++i)
        std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
    idx.resize(k);
    return idx;
}

// y = delta * Tar + r per experience. Tar is the target network's max over
// next actions (valid ones only under decision assist) for Q-learning, or its
// value at the recorded next action for Sarsa. Decision assist adds zero
// targets for every action that was invalid at s.
inline std::vector<nn::TargetSpec> build_targets(std::span<const Experience> batch, const nn::Network& target,
                                                 Algorithm algorithm, Assist assist, double delta) {
    std::vector<nn::TargetSpec> specs;
    specs.reserve(batch.size());
    const bool assisted = assist == Assist::decision;
    for (const auto& e : batch) {
        const Eigen::VectorXd q_next = q_values(target, e.s_next);
        double tar = 0.0;
        if (algorithm == Algorithm::sarsa) {
            if (!e.a_next)
                throw std::invalid_argument("Sarsa target needs the next action");
            tar = q_next(static_cast<Eigen::Index>(*e.a_next));
        } else {
            tar = q_next(static_cast<Eigen::Index>(greedy_action(q_next, e.valid_next, assisted)));
        }
        nn::TargetSpec spec;
        spec.state = e.s;
        spec.action = e.a;
        spec.target = delta * tar + e.r;
        if (assisted)
            for (std::size_t i = 0; i < e.valid_s.size(); ++i)
                if (!e.valid_s[i])
                    spec.zero_mask.push_back(i);
        specs.push_back(std::move(spec));
    }
    return specs;
}

struct GreedyEvaluation {
    double throughput = 0.0;
    double mean_abs_invalid_q = 0.0;
};

// Fresh rollout from empty buffers with epsilon = 0.
inline GreedyEvaluation evaluate_greedy(const nn::Network& net, const EnvConfig& cfg, std::int64_t slots, Rng& rng) {
    if (slots < 1)
        throw std::invalid_argument("evaluation needs at least one slot");
    const bool masked = cfg.mode == InvalidActionMode::masked;
    EnvState s = reset(cfg, rng);
    std::int64_t delivered = 0;
    double invalid_q_sum = 0.0;
    std::int64_t invalid_q_count = 0;
    for (std::int64_t n = 0; n < slots; ++n) {
        const ActionMask mask = valid_action_mask(s, cfg);
        const Eigen::VectorXd q = q_values(net, encode_state(s, cfg));
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (!mask[i]) {
                invalid_q_sum += std::abs(q(static_cast<Eigen::Index>(i)));
                ++invalid_q_count;
            }
        const auto a = greedy_action(q, mask, masked);
        if (step(s, Action::from_index(a, cfg.relays()), cfg, rng).action_class == ActionClass::rewarded)
            ++delivered;
    }
    GreedyEvaluation r;
    r.throughput = static_cast<double>(delivered) / static_cast<double>(slots);
    r.mean_abs_invalid_q = invalid_q_count ? invalid_q_sum / static_cast<double>(invalid_q_count) : 0.0;
    return r;
}

inline Policy greedy_policy(const nn::Network& net, const EnvConfig& cfg) {
    const bool masked = cfg.mode == InvalidActionMode::masked;
    return [&net, cfg, masked](const EnvState& s) {
        const auto a = greedy_action(q_values(net, encode_state(s, cfg)), valid_action_mask(s, cfg), masked);
        return Action::from_index(a, cfg.relays());
    };
}

// Decision assist trains against a masked environment; punishment against a
// punishable one.
inline EnvConfig training_env(EnvConfig cfg, Assist assist) {
    cfg.mode = assist == Assist::decision ? InvalidActionMode::masked : InvalidActionMode::punishable;
    return cfg;
}

inline std::vector<std::size_t> layer_sizes(const EnvConfig& env, const TrainConfig& cfg) {
    std::vector<std::size_t> sizes{env.state_dim()};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(env.num_actions());
    return sizes;
}

// Independent random streams of one training run.
struct SeedStreams {
    std::uint64_t init;
    std::uint64_t env;
    std::uint64_t agent;
    std::uint64_t eval;

    explicit SeedStreams(std::uint64_t seed) {
        Rng master(seed);
        init = master.engine()();
        env = master.engine()();
        agent = master.engine()();
        eval = master.engine()();
    }
};

struct TrainResult {
    nn::Network network;
    std::vector<Metrics> metrics;
};

using MetricsSink = std::function<void(const Metrics&)>;

// Observes the training loop; used by tests to check phase invariants.
struct TrainHooks {
    std::function<void(const nn::Network& prediction, const nn::Network& target, std::size_t iteration)>
        before_generation;
    std::function<void(const nn::Network& prediction, const nn::Network& target, std::size_t iteration,
                       std::span<const Experience> phase, std::span<const nn::TargetSpec> targets,
                       std::span<const std::size_t> sampled)>
        after_targets;
    // Checked after each logged round; returning true ends training early.
    std::function<bool(const Metrics&)> stop;
};

// Outer loop: each round runs N_e iterations of {generate N_g experiences,
// sample N_p of them, one Adam update}, then syncs the target network and
// logs a greedy evaluation.
inline TrainResult train(const EnvConfig& env_config, const TrainConfig& cfg, const MetricsSink& sink = {},
                         const TrainHooks& hooks = {}) {
    cfg.validate();
    env_config.validate();
    const EnvConfig env_cfg = training_env(env_config, cfg.assist);
    const SeedStreams seeds(cfg.seed);
    const auto start = std::chrono::steady_clock::now();

    Rng init_rng(seeds.init);
    Rng agent_rng(seeds.agent);
    nn::Network prediction = nn::Network::random(layer_sizes(env_cfg, cfg), init_rng);
    nn::Network target = prediction;
    nn::AdamState opt(prediction);
    EnvRun env(env_cfg, seeds.env);

    TrainResult result;
    std::size_t iteration = 0;
    for (std::size_t round = 0; round < cfg.total_rounds; ++round) {
        double loss_sum = 0.0;
        double eps = 1.0;
        for (std::size_t v = 0; v < cfg.n_e; ++v) {
            ++iteration;
            eps = epsilon(iteration, cfg.f, cfg.eps_min);
            if (hooks.before_generation)
                hooks.before_generation(prediction, target, iteration);
            const auto phase = generate_experiences(env, prediction, cfg.n_g, cfg.algorithm, eps, agent_rng);
            const auto picked = sample_without_replacement(phase.size(), cfg.n_p, agent_rng);
            std::vector<Experience> batch;
            batch.reserve(picked.size());
            for (auto i : picked)
                batch.push_back(phase[i]);
            const auto specs = build_targets(batch, target, cfg.algorithm, cfg.assist, cfg.delta);
            if (hooks.after_targets)
                hooks.after_targets(prediction, target, iteration, phase, specs, picked);
            const auto lg = nn::loss_and_gradient(prediction, specs);
            nn::adam_step(prediction, lg.grads, opt, cfg.lr);
            loss_sum += lg.loss;
        }
        nn::copy_into(prediction, target);

        Rng eval_rng(seeds.eval);
        const auto ev = evaluate_greedy(prediction, env_cfg, cfg.eval_slots, eval_rng);
        Metrics m;
        m.iteration = iteration;
        m.throughput = ev.throughput;
        m.loss = loss_sum / static_cast<double>(cfg.n_e);
        m.epsilon = eps;
        m.mean_abs_invalid_q = ev.mean_abs_invalid_q;
        if (cfg.record_time)
            m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.metrics.push_back(m);
        if (sink)
            sink(m);
        if (hooks.stop && hooks.stop(m))
            break;
    }
    result.network = std::move(prediction);
    return result;
}

} // namespace relaysel
