#ifndef GDD_ORACLE_HPP
#define GDD_ORACLE_HPP

#include <functional>
#include <random>

#include "gdd/bound.hpp"
#include "gdd/model.hpp"
#include "gdd/powersum.hpp"

namespace gdd {

struct OracleLimit {
    std::size_t max_joint_states = std::size_t{1} << 20;
};

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::size_t joint_states(const DiscreteModel& model) {
    std::size_t n = 1;
    for (int d : model.cards) {
        if (n > (std::size_t{1} << 40) / static_cast<std::size_t>(d)) return std::size_t(-1);
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline void check_capacity(const DiscreteModel& model, const OracleLimit& limit) {
    if (joint_states(model) > limit.max_joint_states)
        throw CapacityError("model exceeds oracle capacity");
}

// Joint log table with axes following the elimination order (earliest first).
inline Tensor joint_table(const DiscreteModel& model, const EliminationOrder& order) {
    std::vector<int> dims(static_cast<std::size_t>(model.num_vars));
    for (int k = 0; k < model.num_vars; ++k)
        dims[static_cast<std::size_t>(k)] = model.cards[static_cast<std::size_t>(order.order[static_cast<std::size_t>(k)])];
    Tensor t(dims, 0.0);
    std::vector<int> mi;
    for (std::size_t idx = 0; idx < t.size(); ++idx) {
        unravel(idx, dims, mi);
        double v = 0.0;
        for (const Factor& f : model.factors) {
            std::vector<int> sub(f.scope.size());
            for (std::size_t p = 0; p < f.scope.size(); ++p)
                sub[p] = mi[static_cast<std::size_t>(order.rank[static_cast<std::size_t>(f.scope[p])])];
            double e = f.table.vals[ravel(sub, f.table.dims)];
            if (e == kNegInf) {
                v = kNegInf;
                break;
            }
            v += e;
        }
        t.vals[idx] = v;
    }
    return t;
}

} // namespace detail

// Phi_tau by materializing the joint table and applying sequential power sums.
inline double exact_weighted_logZ(const DiscreteModel& model, const InferenceQuery& query,
                                  const EliminationOrder& order, const OracleLimit& limit = {}) {
    detail::check_capacity(model, limit);
    if (model.num_vars == 0) return 0.0;
    Tensor t = detail::joint_table(model, order);
    for (int k = 0; k < model.num_vars; ++k)
        t = detail::reduce_front(t, query.tau[static_cast<std::size_t>(order.order[static_cast<std::size_t>(k)])]);
    return t.vals[0];
}

// Q(x_B) = log sum_{x_A} exp(theta(x_A, x_B)); x_B keyed by ascending variable.
inline double exact_Q(const DiscreteModel& model, const InferenceQuery& query, const std::vector<int>& x_B,
                      const OracleLimit& limit = {}) {
    std::vector<int> B = query.max_set();
    if (x_B.size() != B.size()) throw std::invalid_argument("exact_Q: incomplete max assignment");
    std::size_t sum_states = 1;
    for (int i : query.sum_set()) sum_states *= static_cast<std::size_t>(model.cards[static_cast<std::size_t>(i)]);
    if (sum_states > limit.max_joint_states) throw CapacityError("conditioned sum exceeds oracle capacity");

    std::vector<int> assign(static_cast<std::size_t>(model.num_vars), 0);
    for (std::size_t j = 0; j < B.size(); ++j) assign[static_cast<std::size_t>(B[j])] = x_B[j];
    std::vector<int> A = query.sum_set();
    std::vector<int> adims;
    for (int i : A) adims.push_back(model.cards[static_cast<std::size_t>(i)]);

    std::vector<double> terms;
    terms.reserve(sum_states);
    std::vector<int> mi;
    for (std::size_t idx = 0; idx < sum_states; ++idx) {
        if (!A.empty()) {
            unravel(idx, adims, mi);
            for (std::size_t p = 0; p < A.size(); ++p) assign[static_cast<std::size_t>(A[p])] = mi[p];
        }
        double v = 0.0;
        for (const Factor& f : model.factors) {
            std::vector<int> sub(f.scope.size());
            for (std::size_t p = 0; p < f.scope.size(); ++p) sub[p] = assign[static_cast<std::size_t>(f.scope[p])];
            double e = f.table.vals[ravel(sub, f.table.dims)];
            if (e == kNegInf) {
                v = kNegInf;
                break;
            }
            v += e;
        }
        terms.push_back(v);
    }
    return log_sum_exp(terms);
}

struct MarginalMapResult {
    double value = 0.0;
    std::vector<int> config; // states of B, ascending variable order (lexicographically smallest argmax)
};

inline MarginalMapResult exact_marginal_map(const DiscreteModel& model, const InferenceQuery& query,
                                            const OracleLimit& limit = {}) {
    detail::check_capacity(model, limit);
    std::vector<int> B = query.max_set();
    std::vector<int> bdims;
    for (int i : B) bdims.push_back(model.cards[static_cast<std::size_t>(i)]);
    std::size_t nb = Tensor::numel(bdims);
    MarginalMapResult best;
    best.value = kNegInf;
    std::vector<int> mi(B.size(), 0);
    for (std::size_t idx = 0; idx < nb; ++idx) {
        if (!B.empty()) unravel(idx, bdims, mi);
        double q = exact_Q(model, query, mi, limit);
        if (q > best.value) {
            best.value = q;
            best.config = mi;
        }
    }
    if (best.config.empty() && !B.empty()) best.config.assign(B.size(), 0);
    return best;
}

inline double finite_diff(const std::function<double(double)>& f, double at, double h) {
    return (f(at + h) - f(at - h)) / (2.0 * h);
}

// --- random instances for property fuzzing -------------------------------

inline DiscreteModel random_model(std::mt19937& rng, int max_vars, int max_states, int max_cliques,
                                  int max_arity = 3, double zero_prob = 0.0) {
    std::uniform_int_distribution<int> nvd(1, max_vars), nsd(1, max_states);
    DiscreteModel m;
    m.num_vars = nvd(rng);
    for (int i = 0; i < m.num_vars; ++i) m.cards.push_back(nsd(rng));
    std::uniform_int_distribution<int> ncd(1, max_cliques);
    std::uniform_real_distribution<double> th(-2.0, 2.0), zp(0.0, 1.0);
    int nf = ncd(rng);
    for (int a = 0; a < nf; ++a) {
        Factor f;
        std::uniform_int_distribution<int> ad(1, std::min(max_arity, m.num_vars));
        int arity = ad(rng);
        std::vector<int> vs(static_cast<std::size_t>(m.num_vars));
        std::iota(vs.begin(), vs.end(), 0);
        std::shuffle(vs.begin(), vs.end(), rng);
        vs.resize(static_cast<std::size_t>(arity));
        f.scope = vs;
        std::vector<int> dims;
        for (int v : f.scope) dims.push_back(m.cards[static_cast<std::size_t>(v)]);
        f.table = Tensor(dims);
        for (double& e : f.table.vals) e = (zero_prob > 0.0 && zp(rng) < zero_prob) ? kNegInf : th(rng);
        m.factors.push_back(std::move(f));
    }
    return m;
}

struct HolderReport {
    int trials = 0;
    int violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    unsigned seed = 0;
};

// Fuzzes Eq.-4 directly: random model, random tau, random feasible weight
// split, random delta; the decomposed bound must dominate the joint value.
inline HolderReport holder_fuzz(unsigned seed, int trials, double tolerance = 1e-10) {
    std::mt19937 rng(seed);
    HolderReport rep;
    rep.seed = seed;
    std::uniform_real_distribution<double> taud(0.0, 2.0), ud(0.0, 1.0), dd(-1.0, 1.0);
    for (int t = 0; t < trials; ++t) {
        DiscreteModel model = random_model(rng, 4, 3, 3);
        ModelGraph graph = build_graph(model);
        std::vector<int> perm(static_cast<std::size_t>(model.num_vars));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        EliminationOrder order = make_order(perm);

        InferenceQuery q;
        for (int i = 0; i < model.num_vars; ++i) {
            double tau = taud(rng);
            if (ud(rng) < 0.25) tau = 0.0; // exercise the max-operator branch
            q.tau.push_back(tau);
        }
        // random nonnegative split of tau_i across singleton + incident cliques
        SplitWeights w;
        w.node.assign(static_cast<std::size_t>(model.num_vars), 0.0);
        w.pair.resize(model.factors.size());
        for (std::size_t f = 0; f < model.factors.size(); ++f) w.pair[f].assign(model.factors[f].scope.size(), 0.0);
        for (int i = 0; i < model.num_vars; ++i) {
            const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
            std::vector<double> shares(nf.size() + 1);
            double z = 0.0;
            for (double& s : shares) {
                s = ud(rng);
                z += s;
            }
            for (double& s : shares) s = q.tau[static_cast<std::size_t>(i)] * s / z;
            w.node[static_cast<std::size_t>(i)] = shares[0];
            for (std::size_t k = 0; k < nf.size(); ++k)
                w.pair[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                    scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))] = shares[k + 1];
        }
        BoundState state = make_state(model, graph, order, std::move(w));
        for (auto& fd : state.shifts.delta)
            for (auto& vd : fd)
                for (double& x : vd) x = dd(rng);
        double rhs = evaluate_bound(model, graph, state);
        double lhs = exact_weighted_logZ(model, q, order);
        double margin = rhs - lhs;
        ++rep.trials;
        rep.min_margin = std::min(rep.min_margin, margin);
        if (margin < -tolerance) ++rep.violations;
    }
    return rep;
}

} // namespace gdd

#endif
