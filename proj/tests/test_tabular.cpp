#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <relaysel/baselines.hpp>
#include <relaysel/tabular.hpp>

#include "oracles.hpp"

using namespace relaysel;
using tabular::QTable;
using tabular::Transition;

TEST(TabularUpdate, ZeroStepLeavesTableUnchanged) {
    QTable t(3, 2);
    t(0, 1) = 0.7;
    t(1, 0) = -0.2;
    const QTable before = t;
    tabular_update(t, Transition{0, 1, 1.0, 1, 0}, Algorithm::q_learning, 0.0, 0.9);
    tabular_update(t, Transition{0, 1, 1.0, 1, 0}, Algorithm::sarsa, 0.0, 0.9);
    EXPECT_EQ(t, before);
}

TEST(TabularUpdate, QLearningAndSarsaBackups) {
    QTable t(2, 2);
    t(1, 0) = 1.0;
    t(1, 1) = 3.0;
    QTable q = t;
    tabular_update(q, Transition{0, 0, 1.0, 1, std::nullopt}, Algorithm::q_learning, 0.5, 0.9);
    EXPECT_DOUBLE_EQ(q(0, 0), 0.5 * (1.0 + 0.9 * 3.0));
    QTable s = t;
    tabular_update(s, Transition{0, 0, 1.0, 1, 0}, Algorithm::sarsa, 0.5, 0.9);
    EXPECT_DOUBLE_EQ(s(0, 0), 0.5 * (1.0 + 0.9 * 1.0));
    EXPECT_THROW(tabular_update(s, Transition{0, 0, 1.0, 1, std::nullopt}, Algorithm::sarsa, 0.5, 0.9),
                 std::invalid_argument);
}

TEST(TabularUpdate, QLearningReachesValueIterationFixedPoint) {
    EXPECT_LT(oracles::tabular_chain_error(0.9), 1e-3);
    EXPECT_LT(oracles::tabular_chain_error(0.5), 1e-3);
}

TEST(StateIndex, BijectiveOnSmallSpace) {
    const std::size_t relays = 2, buffer = 2;
    std::vector<bool> seen(tabular::state_count(relays, buffer), false);
    for (std::size_t l0 = 0; l0 <= buffer; ++l0)
        for (std::size_t l1 = 0; l1 <= buffer; ++l1)
            for (int c0 = 1; c0 <= 4; ++c0)
                for (int c1 = 1; c1 <= 4; ++c1) {
                    const auto idx = tabular::state_index({l0, l1}, {RelayCode(c0), RelayCode(c1)}, buffer);
                    ASSERT_LT(idx, seen.size());
                    EXPECT_FALSE(seen[idx]);
                    seen[idx] = true;
                }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST(TabularOnEnv, GreedyPolicyMatchesEnumeratedOptimum) {
    for (auto alg : {Algorithm::q_learning, Algorithm::sarsa})
        EXPECT_EQ(oracles::tabular_toy_mismatch(alg), std::nullopt) << to_string(alg);
}
