#ifndef GDD_DECODE_HPP
#define GDD_DECODE_HPP

#include <optional>

#include "gdd/bound.hpp"
#include "gdd/oracle.hpp"

namespace gdd {

// Local decoding: per max variable, argmax of its delta sum, lowest state on
// ties.  Returned in ascending variable order of B.
inline std::vector<int> decode_local(const DiscreteModel& model, const ModelGraph& graph,
                                     const BoundState& state, const InferenceQuery& query) {
    std::vector<int> out;
    for (int i : query.max_set()) {
        if (graph.factors_of[static_cast<std::size_t>(i)].empty()) {
            out.push_back(0);
            continue;
        }
        std::vector<double> s = delta_sum(model, graph, state, i);
        int best = 0;
        for (int x = 1; x < static_cast<int>(s.size()); ++x)
            if (s[static_cast<std::size_t>(x)] > s[static_cast<std::size_t>(best)]) best = x;
        out.push_back(best);
    }
    return out;
}

// Exact Q(x_B) when the conditioned sum fits the capacity limit; nullopt
// ("unevaluated") otherwise.  Never an approximation presented as exact.
inline std::optional<double> score_decoding(const DiscreteModel& model, const InferenceQuery& query,
                                            const std::vector<int>& x_B, const OracleLimit& limit = {}) {
    try {
        return exact_Q(model, query, x_B, limit);
    } catch (const CapacityError&) {
        return std::nullopt;
    }
}

} // namespace gdd

#endif
