#ifndef GDD_MODEL_HPP
#define GDD_MODEL_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdd/tensor.hpp"

namespace gdd {

// One clique factor: log-domain table over the scope's joint states,
// last scope variable fastest-varying.
struct Factor {
    std::vector<int> scope;
    Tensor table;
};

struct DiscreteModel {
    int num_vars = 0;
    std::vector<int> cards;
    std::vector<Factor> factors;

    void validate() const {
        if (static_cast<int>(cards.size()) != num_vars)
            throw std::invalid_argument("model: cardinality count mismatch");
        for (int d : cards)
            if (d < 1) throw std::invalid_argument("model: cardinality < 1");
        for (const Factor& f : factors) {
            if (f.scope.empty()) throw std::invalid_argument("model: empty factor scope");
            std::set<int> seen;
            for (int v : f.scope) {
                if (v < 0 || v >= num_vars) throw std::invalid_argument("model: scope index out of range");
                if (!seen.insert(v).second) throw std::invalid_argument("model: duplicate variable in scope");
            }
            std::size_t n = 1;
            for (std::size_t p = 0; p < f.scope.size(); ++p) {
                if (f.table.dims[p] != cards[static_cast<std::size_t>(f.scope[p])])
                    throw std::invalid_argument("model: table dims disagree with cardinalities");
                n *= static_cast<std::size_t>(f.table.dims[p]);
            }
            if (f.table.size() != n) throw std::invalid_argument("model: table size mismatch");
        }
    }
};

struct ModelGraph {
    std::vector<std::vector<int>> factors_of; // N_i: incident factor indices
    std::vector<std::set<int>> adjacency;     // neighboring variables
};

struct EliminationOrder {
    std::vector<int> order; // order[k] eliminated k-th (innermost power sum first)
    std::vector<int> rank;  // inverse permutation
};

inline EliminationOrder make_order(std::vector<int> order) {
    EliminationOrder eo;
    eo.rank.assign(order.size(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) eo.rank[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    eo.order = std::move(order);
    return eo;
}

// Per-variable power-sum weights tau; tau_i = 0 marks a max node.
struct InferenceQuery {
    std::vector<double> tau;

    bool is_max(int i) const { return tau[static_cast<std::size_t>(i)] == 0.0; }
    std::vector<int> max_set() const {
        std::vector<int> b;
        for (int i = 0; i < static_cast<int>(tau.size()); ++i)
            if (is_max(i)) b.push_back(i);
        return b;
    }
    std::vector<int> sum_set() const {
        std::vector<int> a;
        for (int i = 0; i < static_cast<int>(tau.size()); ++i)
            if (!is_max(i)) a.push_back(i);
        return a;
    }
};

inline InferenceQuery all_sum_query(int n) { return {std::vector<double>(static_cast<std::size_t>(n), 1.0)}; }
inline InferenceQuery all_max_query(int n) { return {std::vector<double>(static_cast<std::size_t>(n), 0.0)}; }

inline ModelGraph build_graph(const DiscreteModel& model) {
    ModelGraph g;
    g.factors_of.resize(static_cast<std::size_t>(model.num_vars));
    g.adjacency.resize(static_cast<std::size_t>(model.num_vars));
    for (int a = 0; a < static_cast<int>(model.factors.size()); ++a) {
        const auto& scope = model.factors[static_cast<std::size_t>(a)].scope;
        for (int i : scope) {
            g.factors_of[static_cast<std::size_t>(i)].push_back(a);
            for (int j : scope)
                if (j != i) g.adjacency[static_cast<std::size_t>(i)].insert(j);
        }
    }
    return g;
}

// Weighted min-fill, constrained so every sum variable is eliminated before
// any max variable.  Fill score = sum over would-be fill edges of the product
// of endpoint cardinalities; ties go to the lowest variable index.
inline EliminationOrder constrained_min_fill_order(const DiscreteModel& model, const ModelGraph& graph,
                                                   const InferenceQuery& query) {
    const int n = model.num_vars;
    const int words = (n + 63) / 64;
    // bitset adjacency: fill-in makes neighborhoods dense, so set-based rows
    // turn the heuristic quadratic-with-large-constants on big models
    std::vector<std::uint64_t> adj(static_cast<std::size_t>(n) * static_cast<std::size_t>(words), 0);
    auto row = [&](int v) { return adj.data() + static_cast<std::size_t>(v) * static_cast<std::size_t>(words); };
    for (int i = 0; i < n; ++i)
        for (int j : graph.adjacency[static_cast<std::size_t>(i)]) row(i)[j >> 6] |= 1ull << (j & 63);

    std::vector<bool> done(static_cast<std::size_t>(n), false);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));

    auto for_each_bit = [&](const std::uint64_t* r, auto&& fn) {
        for (int w = 0; w < words; ++w)
            for (std::uint64_t bits = r[w]; bits; bits &= bits - 1)
                fn((w << 6) + std::countr_zero(bits));
    };
    auto fill_score = [&](int v) {
        double s = 0.0;
        const std::uint64_t* nb = row(v);
        for_each_bit(nb, [&](int u) {
            // pairs (u, w) with w > u, both neighbors of v, not adjacent
            const std::uint64_t* ru = row(u);
            for (int w = u >> 6; w < words; ++w) {
                std::uint64_t bits = nb[w] & ~ru[w];
                if (w == (u >> 6)) bits &= ~((2ull << (u & 63)) - 1);  // keep w > u only
                for (; bits; bits &= bits - 1)
                    s += double(model.cards[static_cast<std::size_t>(u)]) *
                         double(model.cards[static_cast<std::size_t>((w << 6) + std::countr_zero(bits))]);
            }
        });
        return s;
    };

    // Scores are cached and recomputed only for vertices whose two-hop
    // neighborhood was touched by the previous elimination.
    std::vector<double> score(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) score[static_cast<std::size_t>(v)] = fill_score(v);
    std::vector<std::uint64_t> nbset(static_cast<std::size_t>(words)), dirty(static_cast<std::size_t>(words));

    for (int phase = 0; phase < 2; ++phase) {
        const bool want_max = (phase == 1);
        for (;;) {
            int best = -1;
            double best_score = 0.0;
            for (int v = 0; v < n; ++v) {
                if (done[static_cast<std::size_t>(v)] || query.is_max(v) != want_max) continue;
                double s = score[static_cast<std::size_t>(v)];
                if (best < 0 || s < best_score) {
                    best = v;
                    best_score = s;
                }
            }
            if (best < 0) break;
            order.push_back(best);
            done[static_cast<std::size_t>(best)] = true;
            std::copy(row(best), row(best) + words, nbset.begin());
            std::copy(nbset.begin(), nbset.end(), dirty.begin());
            for_each_bit(nbset.data(), [&](int u) {
                std::uint64_t* ru = row(u);
                for (int w = 0; w < words; ++w) ru[w] |= nbset[w];
                ru[u >> 6] &= ~(1ull << (u & 63));        // no self loop
                ru[best >> 6] &= ~(1ull << (best & 63));  // drop the eliminated vertex
                for (int w = 0; w < words; ++w) dirty[w] |= ru[w];
            });
            std::fill(row(best), row(best) + words, 0ull);
            for_each_bit(dirty.data(), [&](int v) {
                if (!done[static_cast<std::size_t>(v)]) score[static_cast<std::size_t>(v)] = fill_score(v);
            });
        }
    }
    return make_order(std::move(order));
}

// theta_alpha - sum_i delta_i^alpha, axes in scope order; `shifts` aligned
// with the factor's scope.
inline Tensor reparameterized_factor(const Factor& factor, const std::vector<std::vector<double>>& shifts) {
    if (shifts.size() != factor.scope.size())
        throw std::invalid_argument("reparameterized_factor: one shift per scope variable required");
    for (std::size_t p = 0; p < shifts.size(); ++p)
        if (static_cast<int>(shifts[p].size()) != factor.table.dims[p])
            throw std::invalid_argument("reparameterized_factor: shift length mismatch");
    Tensor out = factor.table;
    std::vector<int> mi;
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
        unravel(idx, out.dims, mi);
        for (std::size_t p = 0; p < shifts.size(); ++p)
            out.vals[idx] -= shifts[p][static_cast<std::size_t>(mi[p])];
    }
    return out;
}

} // namespace gdd

#endif
