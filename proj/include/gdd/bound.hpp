#ifndef GDD_BOUND_HPP
#define GDD_BOUND_HPP

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gdd/model.hpp"
#include "gdd/powersum.hpp"

namespace gdd {

// delta[f][p][x]: shift for scope position p of factor f.
struct CostShift {
    std::vector<std::vector<std::vector<double>>> delta;
};

// Eq.-6 split: w_node[i] + sum_{alpha in N_i} w_pair[alpha][pos_of_i] = tau_i.
struct SplitWeights {
    std::vector<double> node;
    std::vector<std::vector<double>> pair; // pair[f][p]
};

struct BoundState {
    CostShift shifts;
    SplitWeights weights;
    EliminationOrder order;
    std::vector<double> singleton_term; // per variable
    std::vector<double> clique_term;    // per factor
    double value = 0.0;
};

struct ParameterCensus {
    std::size_t pairs = 0;
    std::size_t shift_scalars = 0;
    std::size_t clique_weights = 0;
    std::size_t singleton_weights = 0;
};

inline ParameterCensus parameter_census(const DiscreteModel& model) {
    ParameterCensus c;
    for (const Factor& f : model.factors) {
        c.pairs += f.scope.size();
        for (int v : f.scope) c.shift_scalars += static_cast<std::size_t>(model.cards[static_cast<std::size_t>(v)]);
    }
    c.clique_weights = c.pairs;
    c.singleton_weights = static_cast<std::size_t>(model.num_vars);
    return c;
}

inline CostShift zero_shifts(const DiscreteModel& model) {
    CostShift s;
    s.delta.resize(model.factors.size());
    for (std::size_t f = 0; f < model.factors.size(); ++f)
        for (int v : model.factors[f].scope)
            s.delta[f].emplace_back(static_cast<std::size_t>(model.cards[static_cast<std::size_t>(v)]), 0.0);
    return s;
}

inline int scope_position(const Factor& f, int var) {
    for (std::size_t p = 0; p < f.scope.size(); ++p)
        if (f.scope[p] == var) return static_cast<int>(p);
    throw std::logic_error("variable not in factor scope");
}

// WMB-matching initialization: along the order, cliques whose other variables
// are all eliminated earlier are children (weight 0); the rest share tau_i
// uniformly.  A node with no parent clique carries tau_i on its singleton.
inline SplitWeights init_weights_wmb(const DiscreteModel& model, const ModelGraph& graph,
                                     const EliminationOrder& order, const InferenceQuery& query) {
    SplitWeights w;
    w.node.assign(static_cast<std::size_t>(model.num_vars), 0.0);
    w.pair.resize(model.factors.size());
    for (std::size_t f = 0; f < model.factors.size(); ++f)
        w.pair[f].assign(model.factors[f].scope.size(), 0.0);

    for (int i = 0; i < model.num_vars; ++i) {
        std::vector<int> parents;
        for (int a : graph.factors_of[static_cast<std::size_t>(i)]) {
            bool all_earlier = true;
            for (int j : model.factors[static_cast<std::size_t>(a)].scope)
                if (j != i && order.rank[static_cast<std::size_t>(j)] > order.rank[static_cast<std::size_t>(i)])
                    all_earlier = false;
            if (!all_earlier) parents.push_back(a);
        }
        const double tau = query.tau[static_cast<std::size_t>(i)];
        if (parents.empty()) {
            w.node[static_cast<std::size_t>(i)] = tau;
        } else {
            for (int a : parents)
                w.pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(
                    scope_position(model.factors[static_cast<std::size_t>(a)], i))] = tau / double(parents.size());
        }
    }
    return w;
}

// Interior alternative: tau_i shared across the singleton and every incident
// clique.  Used when the weight optimum must be approachable from the interior.
inline SplitWeights init_weights_uniform(const DiscreteModel& model, const ModelGraph& graph,
                                         const InferenceQuery& query) {
    SplitWeights w;
    w.node.assign(static_cast<std::size_t>(model.num_vars), 0.0);
    w.pair.resize(model.factors.size());
    for (std::size_t f = 0; f < model.factors.size(); ++f)
        w.pair[f].assign(model.factors[f].scope.size(), 0.0);
    for (int i = 0; i < model.num_vars; ++i) {
        const double tau = query.tau[static_cast<std::size_t>(i)];
        const double share = tau / double(graph.factors_of[static_cast<std::size_t>(i)].size() + 1);
        w.node[static_cast<std::size_t>(i)] = share;
        for (int a : graph.factors_of[static_cast<std::size_t>(i)])
            w.pair[static_cast<std::size_t>(a)][static_cast<std::size_t>(
                scope_position(model.factors[static_cast<std::size_t>(a)], i))] = share;
    }
    return w;
}

inline std::vector<double> delta_sum(const DiscreteModel& model, const ModelGraph& graph,
                                     const BoundState& state, int i) {
    std::vector<double> s(static_cast<std::size_t>(model.cards[static_cast<std::size_t>(i)]), 0.0);
    for (int a : graph.factors_of[static_cast<std::size_t>(i)]) {
        const auto& d = state.shifts.delta[static_cast<std::size_t>(a)][static_cast<std::size_t>(
            scope_position(model.factors[static_cast<std::size_t>(a)], i))];
        for (std::size_t x = 0; x < s.size(); ++x) s[x] += d[x];
    }
    return s;
}

// Scope positions of factor f sorted by elimination rank (earliest first).
inline std::vector<int> elim_scope_perm(const Factor& f, const EliminationOrder& order) {
    std::vector<int> perm(f.scope.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) {
        return order.rank[static_cast<std::size_t>(f.scope[static_cast<std::size_t>(a)])] <
               order.rank[static_cast<std::size_t>(f.scope[static_cast<std::size_t>(b)])];
    });
    return perm;
}

inline WeightedScope weighted_scope(const DiscreteModel& model, const BoundState& state, int f) {
    const Factor& fac = model.factors[static_cast<std::size_t>(f)];
    std::vector<int> perm = elim_scope_perm(fac, state.order);
    WeightedScope ws;
    for (int p : perm) {
        int v = fac.scope[static_cast<std::size_t>(p)];
        ws.vars.push_back(v);
        ws.dims.push_back(model.cards[static_cast<std::size_t>(v)]);
        ws.weights.push_back(state.weights.pair[static_cast<std::size_t>(f)][static_cast<std::size_t>(p)]);
    }
    return ws;
}

// Shifted clique table permuted into elimination-order axes.
inline Tensor clique_table_elim(const DiscreteModel& model, const BoundState& state, int f) {
    const Factor& fac = model.factors[static_cast<std::size_t>(f)];
    Tensor t = reparameterized_factor(fac, state.shifts.delta[static_cast<std::size_t>(f)]);
    return permute_axes(t, elim_scope_perm(fac, state.order));
}

inline double singleton_term_value(const DiscreteModel& model, const ModelGraph& graph,
                                   const BoundState& state, int i) {
    return power_sum_scalar(delta_sum(model, graph, state, i), state.weights.node[static_cast<std::size_t>(i)]);
}

inline double clique_term_value(const DiscreteModel& model, const BoundState& state, int f) {
    return eliminate(clique_table_elim(model, state, f), weighted_scope(model, state, f)).value;
}

// Full recomputation of L(delta, w); refreshes the per-term caches.
inline double evaluate_bound(const DiscreteModel& model, const ModelGraph& graph, BoundState& state) {
    state.singleton_term.resize(static_cast<std::size_t>(model.num_vars));
    state.clique_term.resize(model.factors.size());
    double L = 0.0;
    for (int i = 0; i < model.num_vars; ++i) {
        state.singleton_term[static_cast<std::size_t>(i)] = singleton_term_value(model, graph, state, i);
        L += state.singleton_term[static_cast<std::size_t>(i)];
    }
    for (int f = 0; f < static_cast<int>(model.factors.size()); ++f) {
        state.clique_term[static_cast<std::size_t>(f)] = clique_term_value(model, state, f);
        L += state.clique_term[static_cast<std::size_t>(f)];
    }
    state.value = L;
    return L;
}

inline double cached_bound(const BoundState& state) {
    double L = 0.0;
    for (double t : state.singleton_term) L += t;
    for (double t : state.clique_term) L += t;
    return L;
}

inline BoundState make_state(const DiscreteModel& model, const ModelGraph& graph,
                             const EliminationOrder& order, SplitWeights weights) {
    BoundState s;
    s.shifts = zero_shifts(model);
    s.weights = std::move(weights);
    s.order = order;
    evaluate_bound(model, graph, s);
    return s;
}

// mu_i: softmax of the delta sum at temperature w_i; uniform over the argmax
// set when w_i = 0.
inline std::vector<double> singleton_belief(const DiscreteModel& model, const ModelGraph& graph,
                                            const BoundState& state, int i) {
    std::vector<double> s = delta_sum(model, graph, state, i);
    const double w = state.weights.node[static_cast<std::size_t>(i)];
    std::vector<double> mu(s.size(), 0.0);
    double m = *std::max_element(s.begin(), s.end());
    if (w <= kWeightZeroTol) {
        int count = 0;
        for (double x : s)
            if (x >= m - kArgmaxTol) ++count;
        for (std::size_t x = 0; x < s.size(); ++x)
            if (s[x] >= m - kArgmaxTol) mu[x] = 1.0 / double(count);
        return mu;
    }
    double z = 0.0;
    for (std::size_t x = 0; x < s.size(); ++x) {
        mu[x] = std::exp((s[x] - m) / w);
        z += mu[x];
    }
    for (double& p : mu) p /= z;
    return mu;
}

inline nlohmann::json state_to_json(const BoundState& state) {
    nlohmann::json j;
    j["delta"] = state.shifts.delta;
    j["node_weights"] = state.weights.node;
    j["pair_weights"] = state.weights.pair;
    j["order"] = state.order.order;
    j["bound"] = state.value;
    return j;
}

} // namespace gdd

#endif
