#ifndef GDD_CHECKS_HPP
#define GDD_CHECKS_HPP

#include <sstream>

#include "gdd/gdd.hpp"
#include "gdd/oracle.hpp"

namespace gdd {

struct SuiteReport {
    bool pass = true;
    std::string detail;
};

// Random tree: node k > 0 attaches to a uniform earlier node.
inline DiscreteModel random_tree_model(std::mt19937& rng, int num_vars, int max_states) {
    DiscreteModel m;
    m.num_vars = num_vars;
    std::uniform_int_distribution<int> nsd(2, max_states);
    for (int i = 0; i < num_vars; ++i) m.cards.push_back(nsd(rng));
    std::uniform_real_distribution<double> th(-2.0, 2.0);
    for (int k = 1; k < num_vars; ++k) {
        std::uniform_int_distribution<int> pd(0, k - 1);
        Factor f;
        f.scope = {pd(rng), k};
        f.table = Tensor({m.cards[static_cast<std::size_t>(f.scope[0])], m.cards[static_cast<std::size_t>(f.scope[1])]});
        for (double& e : f.table.vals) e = th(rng);
        m.factors.push_back(std::move(f));
    }
    return m;
}

inline InferenceQuery random_mixed_query(std::mt19937& rng, int num_vars) {
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    InferenceQuery q;
    for (int i = 0; i < num_vars; ++i) q.tau.push_back(ud(rng) < 0.5 ? 0.0 : 1.0);
    return q;
}

inline SuiteReport check_holder(unsigned seed, int trials) {
    HolderReport rep = holder_fuzz(seed, trials);
    SuiteReport out;
    out.pass = rep.violations == 0;
    std::ostringstream os;
    os << "holder: trials=" << rep.trials << " violations=" << rep.violations << " min_margin=" << rep.min_margin
       << " seed=" << rep.seed;
    out.detail = os.str();
    return out;
}

// Eq.-7 / Eq.-8 gradients against central finite differences of L.
inline SuiteReport check_gradients(unsigned seed, int trials, double h = 1e-6, double tol = 1e-5) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dd(-1.0, 1.0);
    SuiteReport out;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        DiscreteModel model = random_model(rng, 4, 3, 3);
        ModelGraph graph = build_graph(model);
        InferenceQuery q = all_sum_query(model.num_vars);
        EliminationOrder order = constrained_min_fill_order(model, graph, q);
        BoundState state = make_state(model, graph, order, init_weights_uniform(model, graph, q));
        for (auto& fd : state.shifts.delta)
            for (auto& vd : fd)
                for (double& x : vd) x = dd(rng);
        evaluate_bound(model, graph, state);

        for (int i = 0; i < model.num_vars; ++i) {
            const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
            if (nf.empty()) continue;
            BlockBeliefs b = block_beliefs(model, graph, state, q, i);
            auto g = delta_gradient(b);
            for (std::size_t k = 0; k < nf.size(); ++k) {
                const std::size_t pos =
                    static_cast<std::size_t>(scope_position(model.factors[static_cast<std::size_t>(nf[k])], i));
                for (std::size_t x = 0; x < g[k].size(); ++x) {
                    auto f = [&](double v) {
                        BoundState s = state;
                        s.shifts.delta[static_cast<std::size_t>(nf[k])][pos][x] = v;
                        return evaluate_bound(model, graph, s);
                    };
                    double base = state.shifts.delta[static_cast<std::size_t>(nf[k])][pos][x];
                    double fd = finite_diff(f, base, h);
                    worst = std::max(worst, std::abs(fd - g[k][x]) / std::max(std::abs(fd), 1e-4));
                }
                // Eq.-8 along the simplex-feasible direction (w_i -> w_i^alpha)
                auto fw = [&](double eps) {
                    BoundState s = state;
                    s.weights.node[static_cast<std::size_t>(i)] -= eps;
                    s.weights.pair[static_cast<std::size_t>(nf[k])][pos] += eps;
                    return evaluate_bound(model, graph, s);
                };
                double fd = finite_diff(fw, 0.0, h);
                double an = b.h_cond[k] - b.h_i;
                worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), 1e-4));
            }
        }
    }
    out.pass = worst <= tol;
    std::ostringstream os;
    os << "gradients: trials=" << trials << " max_rel_err=" << worst << " seed=" << seed;
    out.detail = os.str();
    return out;
}

struct CorpusReport {
    bool monotone = true;
    bool anytime = true;
    bool parallel_match = true;
    double worst_increase = 0.0;
    double worst_gap = 0.0; // min over trace of (bound - oracle)
    double worst_parallel_diff = 0.0;
    int models = 0;
    unsigned seed = 0;
};

// Monotonicity, anytime validity against the oracle, and sequential/parallel
// trace agreement over one seeded corpus of small models.
inline CorpusReport check_corpus(unsigned seed, int num_models, int max_sweeps = 60, bool compare_parallel = true) {
    std::mt19937 rng(seed);
    CorpusReport rep;
    rep.seed = seed;
    rep.worst_gap = std::numeric_limits<double>::infinity();
    for (int t = 0; t < num_models; ++t) {
        DiscreteModel model = random_model(rng, 8, 2, 8);
        InferenceQuery q = random_mixed_query(rng, model.num_vars);
        OptimizerConfig cfg;
        cfg.max_sweeps = max_sweeps;
        cfg.score_decodings = false;
        RunResult seq = run(model, q, cfg);
        ++rep.models;

        double oracle = exact_weighted_logZ(model, q, seq.order);
        for (std::size_t k = 0; k < seq.trace.size(); ++k) {
            rep.worst_gap = std::min(rep.worst_gap, seq.trace[k].bound - oracle);
            if (seq.trace[k].bound < oracle - 1e-9) rep.anytime = false;
            if (k > 0) {
                rep.worst_increase = std::max(rep.worst_increase, seq.trace[k].bound - seq.trace[k - 1].bound);
                if (seq.trace[k].bound > seq.trace[k - 1].bound + 1e-10) rep.monotone = false;
            }
        }
        if (compare_parallel) {
            cfg.parallel = true;
            RunResult par = run(model, q, cfg);
            if (par.trace.size() != seq.trace.size()) {
                rep.parallel_match = false;
            } else {
                for (std::size_t k = 0; k < seq.trace.size(); ++k) {
                    double d = std::abs(par.trace[k].bound - seq.trace[k].bound);
                    rep.worst_parallel_diff = std::max(rep.worst_parallel_diff, d);
                    if (d > 1e-12) rep.parallel_match = false;
                }
            }
        }
    }
    return rep;
}

inline SuiteReport check_monotone_anytime(unsigned seed, int num_models) {
    CorpusReport rep = check_corpus(seed, num_models, 60, false);
    SuiteReport out;
    out.pass = rep.monotone && rep.anytime;
    std::ostringstream os;
    os << "monotone/anytime: models=" << rep.models << " worst_increase=" << rep.worst_increase
       << " worst_gap=" << rep.worst_gap << " seed=" << seed;
    out.detail = os.str();
    return out;
}

inline SuiteReport check_parallel(unsigned seed, int num_models) {
    CorpusReport rep = check_corpus(seed, num_models, 40, true);
    SuiteReport out;
    out.pass = rep.parallel_match;
    std::ostringstream os;
    os << "parallel: models=" << rep.models << " worst_trace_diff=" << rep.worst_parallel_diff << " seed=" << seed;
    out.detail = os.str();
    return out;
}

struct KktReport {
    bool pass = true;
    double worst_kkt = 0.0;
    double worst_moment = 0.0;
    int models = 0;
    int interior_pairs = 0;
};

// Eq.-11 entropy matching and Eq.-7 moment matching at convergence, from an
// interior weight initialization on sum-inference problems.  The Eq.-11
// residuals w(H - Hbar) are checked everywhere; Eq.-7 moment matching is a
// smooth stationarity condition, so it is asserted on the pairs whose
// weights stay interior (the bound is exponentially flat in the others and
// no finite sweep count pins them down).
inline KktReport check_kkt(unsigned seed, int num_models, double tol = 1e-5) {
    std::mt19937 rng(seed);
    KktReport rep;
    for (int t = 0; t < num_models; ++t) {
        DiscreteModel model = random_tree_model(rng, 4, 2);
        InferenceQuery q = all_sum_query(model.num_vars);
        OptimizerConfig cfg;
        cfg.max_sweeps = 3000;
        cfg.rel_tol = 1e-13;
        cfg.weight_init = WeightInit::uniform;
        cfg.score_decodings = false;
        RunResult r = run(model, q, cfg);
        ++rep.models;
        for (int i = 0; i < model.num_vars; ++i) {
            const auto& nf = r.graph.factors_of[static_cast<std::size_t>(i)];
            if (nf.empty()) continue;
            BlockBeliefs b = block_beliefs(model, r.graph, r.state, q, i);
            double wi = r.state.weights.node[static_cast<std::size_t>(i)];
            rep.worst_kkt = std::max(rep.worst_kkt, std::abs(wi * (b.h_i - b.h_bar)));
            for (std::size_t k = 0; k < nf.size(); ++k) {
                double wa = r.state.weights.pair[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                    scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))];
                rep.worst_kkt = std::max(rep.worst_kkt, std::abs(wa * (b.h_cond[k] - b.h_bar)));
                if (std::min(wi, wa) >= 1e-3) {
                    ++rep.interior_pairs;
                    for (std::size_t x = 0; x < b.mu_i.size(); ++x)
                        rep.worst_moment = std::max(rep.worst_moment, std::abs(b.mu_i[x] - b.clique_marg[k][x]));
                }
            }
        }
    }
    rep.pass = rep.worst_kkt <= tol && rep.worst_moment <= tol && rep.interior_pairs > 0;
    return rep;
}

inline SuiteReport check_kkt_suite(unsigned seed, int num_models) {
    KktReport rep = check_kkt(seed, num_models);
    SuiteReport out;
    out.pass = rep.pass;
    std::ostringstream os;
    os << "kkt: models=" << rep.models << " worst_kkt=" << rep.worst_kkt << " worst_moment=" << rep.worst_moment
       << " interior_pairs=" << rep.interior_pairs << " seed=" << seed;
    out.detail = os.str();
    return out;
}

} // namespace gdd

#endif
