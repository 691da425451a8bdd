// Delay-constrained throughput of max-link and of a uniformly random valid
// policy as the target delay grows, on the non-identical relay layout.
#include <cstdio>

#include <relaysel/harness.hpp>

using namespace relaysel;

int main() {
    auto cfg = harness::preset("inid_default");
    std::printf("delay  max-link  random\n");
    for (std::int64_t delay : {2, 4, 6, 10, 20, 50, 100}) {
        cfg.delay = delay;
        const auto env = cfg.env();
        const double ml = harness::eval_named_policy("max-link", env, 200000, 1);
        const double rnd = harness::eval_named_policy("random", env, 200000, 1);
        std::printf("%5lld  %8.4f  %6.4f\n", static_cast<long long>(delay), ml, rnd);
    }
}
