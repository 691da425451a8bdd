#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relaysel {

enum class Algorithm { q_learning, sarsa };

// How invalid actions are handled during learning.
enum class Assist {
    decision,  ///< masked selection plus zero-target pairs for invalid actions
    punishment ///< unmasked selection, invalid actions rewarded -1
};

inline std::string to_string(Algorithm a) { return a == Algorithm::sarsa ? "sarsa" : "q"; }
inline std::string to_string(Assist a) { return a == Assist::decision ? "decision" : "punish"; }

inline Algorithm parse_algorithm(std::string_view s) {
    if (s == "q" || s == "q-learning" || s == "ql")
        return Algorithm::q_learning;
    if (s == "sarsa")
        return Algorithm::sarsa;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) + "' (expected q or sarsa)");
}

inline Assist parse_assist(std::string_view s) {
    if (s == "decision" || s == "assist")
        return Assist::decision;
    if (s == "punish" || s == "punishment")
        return Assist::punishment;
    throw std::invalid_argument("unknown assist mode '" + std::string(s) + "' (expected decision or punish)");
}

// Conventional variant names: DAD-Sarsa, DAD-QL, punish-Sarsa, punish-QL.
inline std::string variant_name(Algorithm alg, Assist assist) {
    return std::string(assist == Assist::decision ? "DAD-" : "punish-") +
           (alg == Algorithm::sarsa ? "Sarsa" : "QL");
}

} // namespace relaysel
