// Trains DAD-Sarsa on a single always-on relay with a one-packet buffer and
// prints the learned Q-values next to the greedy throughput.
#include <cstdio>

#include <relaysel/agents.hpp>

using namespace relaysel;

int main() {
    EnvConfig env{Topology::equidistant(1, 5.0, 3.0, 1e5), 1, 8.0, 6};
    env.fading = Fading::constant;

    TrainConfig tc;
    tc.total_rounds = 10;
    tc.eval_slots = 1000;
    const auto result = train(env, tc, [](const Metrics& m) {
        std::printf("iteration %5zu  throughput %.3f  loss %.4f  epsilon %.3f\n", m.iteration, m.throughput, m.loss,
                    m.epsilon);
    });

    const auto cfg = training_env(env, tc.assist);
    Rng rng(1);
    EnvState s = reset(cfg, rng);
    const char* names[] = {"none", "S->R", "R->D"};
    for (int phase = 0; phase < 2; ++phase) {
        const auto q = q_values(result.network, encode_state(s, cfg));
        std::printf("buffer %zu:", s.buffers[0].size());
        for (Eigen::Index a = 0; a < q.size(); ++a)
            std::printf("  Q(%s) = %7.3f", names[a], q(a));
        std::printf("\n");
        if (phase == 0)
            step(s, Action::source_to_relay(0), cfg, rng);
    }
}
