#ifndef GDD_GDD_HPP
#define GDD_GDD_HPP

#include <chrono>
#include <cstdlib>
#include <thread>

#include "gdd/bound.hpp"
#include "gdd/decode.hpp"
#include "gdd/io.hpp"
#include "gdd/model.hpp"
#include "gdd/powersum.hpp"

namespace gdd {

enum class WeightInit { wmb, uniform };

struct OptimizerConfig {
    int max_sweeps = 200;
    double rel_tol = 1e-8;
    int inner_grad_steps = 5;
    double armijo_c = 1e-4;
    double backtrack_factor = 0.5;
    int max_backtracks = 20;
    double initial_step = 1.0;
    double weight_floor = 1e-8;
    bool parallel = false;
    unsigned seed = 0;
    WeightInit weight_init = WeightInit::wmb;
    bool score_decodings = true;
    OracleLimit score_limit;
};

// Greedy coloring on the variable adjacency; classes in color order, nodes
// within a class share no clique and may be updated concurrently.
inline std::vector<std::vector<int>> color_schedule(const ModelGraph& graph) {
    const int n = static_cast<int>(graph.adjacency.size());
    std::vector<int> color(static_cast<std::size_t>(n), -1);
    int num_colors = 0;
    for (int v = 0; v < n; ++v) {
        std::vector<bool> used(static_cast<std::size_t>(num_colors) + 1, false);
        for (int u : graph.adjacency[static_cast<std::size_t>(v)])
            if (color[static_cast<std::size_t>(u)] >= 0) used[static_cast<std::size_t>(color[static_cast<std::size_t>(u)])] = true;
        int c = 0;
        while (c < num_colors && used[static_cast<std::size_t>(c)]) ++c;
        color[static_cast<std::size_t>(v)] = c;
        num_colors = std::max(num_colors, c + 1);
    }
    std::vector<std::vector<int>> classes(static_cast<std::size_t>(num_colors));
    for (int v = 0; v < n; ++v) classes[static_cast<std::size_t>(color[static_cast<std::size_t>(v)])].push_back(v);
    return classes;
}

// gamma_i^alpha for every alpha in N_i: the clique table with every shift but
// delta_i^alpha applied, power-summed down to x_i.
inline std::vector<std::vector<double>> gamma_vectors(const DiscreteModel& model, const ModelGraph& graph,
                                                      const BoundState& state, int i) {
    std::vector<std::vector<double>> gamma;
    for (int a : graph.factors_of[static_cast<std::size_t>(i)]) {
        const Factor& fac = model.factors[static_cast<std::size_t>(a)];
        auto shifts = state.shifts.delta[static_cast<std::size_t>(a)];
        const int pos = scope_position(fac, i);
        std::fill(shifts[static_cast<std::size_t>(pos)].begin(), shifts[static_cast<std::size_t>(pos)].end(), 0.0);
        Tensor t = reparameterized_factor(fac, shifts);
        std::vector<int> perm = elim_scope_perm(fac, state.order);
        t = permute_axes(t, perm);
        WeightedScope ws = weighted_scope(model, state, a);
        int keep = 0;
        while (ws.vars[static_cast<std::size_t>(keep)] != i) ++keep;
        gamma.push_back(eliminate_all_but_one(t, ws, keep));
    }
    return gamma;
}

// Star update for a zero-weight node (Eq.-9 form): solves the pseudo-marginal
// matching system jointly over N_i.  Never increases the bound.
inline void closed_form_block_update(const DiscreteModel& model, const ModelGraph& graph, BoundState& state,
                                     int i) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    if (nf.empty()) return;
    std::vector<std::vector<double>> gamma = gamma_vectors(model, graph, state, i);
    const std::size_t d = gamma[0].size();
    std::vector<double> total(d, 0.0);
    for (const auto& g : gamma)
        for (std::size_t x = 0; x < d; ++x) total[x] += g[x];
    const double denom = double(nf.size()) + 1.0;
    for (std::size_t k = 0; k < nf.size(); ++k) {
        auto& delta = state.shifts.delta[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
            scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))];
        for (std::size_t x = 0; x < d; ++x) delta[x] = gamma[k][x] - total[x] / denom;
    }
    state.singleton_term[static_cast<std::size_t>(i)] = singleton_term_value(model, graph, state, i);
    for (int a : nf) state.clique_term[static_cast<std::size_t>(a)] = clique_term_value(model, state, a);
}

// Beliefs and entropies entering the Eq.-7/Eq.-8 gradients for one block.
// Marginals are kept in the log domain too: near the simplex boundary the
// probability-domain values underflow while their logs stay informative.
struct BlockBeliefs {
    std::vector<double> mu_i;                      // singleton belief
    std::vector<std::vector<double>> clique_marg;  // per alpha, marginal on x_i
    std::vector<double> log_mu_i;
    std::vector<std::vector<double>> log_marg;
    double h_i = 0.0;                              // H(x_i; mu_i)
    std::vector<double> h_cond;                    // per alpha, H(x_i | suffix; mu_alpha)
    double h_bar = 0.0;                            // tau-weighted average entropy
};

inline BlockBeliefs block_beliefs(const DiscreteModel& model, const ModelGraph& graph, const BoundState& state,
                                  const InferenceQuery& query, int i) {
    BlockBeliefs b;
    b.mu_i = singleton_belief(model, graph, state, i);
    b.h_i = entropy(b.mu_i);
    const int di = model.cards[static_cast<std::size_t>(i)];
    {
        const double wi = state.weights.node[static_cast<std::size_t>(i)];
        if (wi > kWeightZeroTol) {
            std::vector<double> s = delta_sum(model, graph, state, i);
            const double z = power_sum_scalar(s, wi);
            for (double x : s) b.log_mu_i.push_back((x - z) / wi);
        } else {
            for (double p : b.mu_i) b.log_mu_i.push_back(p > 0.0 ? std::log(p) : kNegInf);
        }
    }
    for (int a : graph.factors_of[static_cast<std::size_t>(i)]) {
        WeightedScope ws = weighted_scope(model, state, a);
        EliminateResult er = eliminate(clique_table_elim(model, state, a), ws);
        CliqueBelief cb = clique_belief(er.partials, ws);
        int pos = 0;
        while (ws.vars[static_cast<std::size_t>(pos)] != i) ++pos;
        std::vector<double> marg(static_cast<std::size_t>(di), 0.0);
        std::vector<std::vector<double>> lcol(static_cast<std::size_t>(di));
        std::vector<int> mi;
        for (std::size_t idx = 0; idx < cb.joint.size(); ++idx) {
            unravel(idx, cb.joint.dims, mi);
            const auto xi = static_cast<std::size_t>(mi[static_cast<std::size_t>(pos)]);
            marg[xi] += cb.joint.vals[idx];
            double lp = 0.0;
            for (std::size_t k = 0; k < cb.cond_log.size() && lp != kNegInf; ++k) {
                std::vector<int> sub(mi.begin() + static_cast<int>(k), mi.end());
                double lc = cb.cond_log[k].vals[ravel(sub, cb.cond_log[k].dims)];
                lp = (lc == kNegInf) ? kNegInf : lp + lc;
            }
            lcol[xi].push_back(lp);
        }
        std::vector<double> lmarg(static_cast<std::size_t>(di));
        for (int x = 0; x < di; ++x) lmarg[static_cast<std::size_t>(x)] = log_sum_exp(lcol[static_cast<std::size_t>(x)]);
        b.clique_marg.push_back(std::move(marg));
        b.log_marg.push_back(std::move(lmarg));
        b.h_cond.push_back(conditional_entropies(cb)[static_cast<std::size_t>(pos)]);
    }
    const double tau = query.tau[static_cast<std::size_t>(i)];
    if (tau > 0.0) {
        double acc = state.weights.node[static_cast<std::size_t>(i)] * b.h_i;
        const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < nf.size(); ++k)
            acc += state.weights.pair[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                       scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))] *
                   b.h_cond[k];
        b.h_bar = acc / tau;
    }
    return b;
}

// Eq.-7 gradient: d L / d delta_i^alpha(x_i) = mu_i(x_i) - marg_alpha(x_i).
inline std::vector<std::vector<double>> delta_gradient(const BlockBeliefs& b) {
    std::vector<std::vector<double>> g;
    for (const auto& marg : b.clique_marg) {
        std::vector<double> gi(b.mu_i.size());
        for (std::size_t x = 0; x < gi.size(); ++x) gi[x] = b.mu_i[x] - marg[x];
        g.push_back(std::move(gi));
    }
    return g;
}

struct WeightGradient {
    double node;                 // H(x_i; mu_i)
    std::vector<double> pair;    // per alpha, conditional entropy
};

inline WeightGradient weight_gradient(const BlockBeliefs& b) { return {b.h_i, b.h_cond}; }

// Eq.-10 multiplicative step, renormalized so the tau simplex holds exactly.
// Exact zeros are fixed points; positive entries are floored at
// weight_floor * tau before renormalization.
inline void exp_weight_update(double& w_node, std::vector<double>& w_pair, const BlockBeliefs& b, double eta,
                              double tau, double weight_floor) {
    if (tau <= 0.0) return;
    double total = 0.0;
    auto bump = [&](double w, double h) {
        if (w <= 0.0) return 0.0;
        // clamped so the renormalization below never sees inf/NaN
        double e = std::clamp(-eta * w * (h - b.h_bar), -700.0, 700.0);
        double nw = w * std::exp(e);
        nw = std::max(nw, weight_floor * tau);
        return nw;
    };
    w_node = bump(w_node, b.h_i);
    total += w_node;
    for (std::size_t k = 0; k < w_pair.size(); ++k) {
        w_pair[k] = bump(w_pair[k], b.h_cond[k]);
        total += w_pair[k];
    }
    if (total <= 0.0) return;
    const double scale = tau / total;
    w_node *= scale;
    for (double& w : w_pair) w *= scale;
}

namespace detail {

// Snapshot of one node's private footprint: its delta columns, weights and
// the cached terms they feed.  Candidates are written in place (the parallel
// schedule keeps footprints disjoint) and rolled back on rejection.
struct BlockSnapshot {
    std::vector<std::size_t> pos;
    std::vector<std::vector<double>> delta;
    std::vector<double> wp, cterm;
    double wn = 0.0, sterm = 0.0;
};

inline BlockSnapshot snapshot_block(const DiscreteModel& model, const ModelGraph& graph, const BoundState& state,
                                    int i) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    BlockSnapshot s;
    s.pos.resize(nf.size());
    s.delta.resize(nf.size());
    s.wp.resize(nf.size());
    s.cterm.resize(nf.size());
    for (std::size_t k = 0; k < nf.size(); ++k) {
        const int a = nf[k];
        s.pos[k] = static_cast<std::size_t>(scope_position(model.factors[static_cast<std::size_t>(a)], i));
        s.delta[k] = state.shifts.delta[static_cast<std::size_t>(a)][s.pos[k]];
        s.wp[k] = state.weights.pair[static_cast<std::size_t>(a)][s.pos[k]];
        s.cterm[k] = state.clique_term[static_cast<std::size_t>(a)];
    }
    s.wn = state.weights.node[static_cast<std::size_t>(i)];
    s.sterm = state.singleton_term[static_cast<std::size_t>(i)];
    return s;
}

inline void restore_block(const ModelGraph& graph, BoundState& state, int i, const BlockSnapshot& s) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < nf.size(); ++k) {
        state.shifts.delta[static_cast<std::size_t>(nf[k])][s.pos[k]] = s.delta[k];
        state.weights.pair[static_cast<std::size_t>(nf[k])][s.pos[k]] = s.wp[k];
        state.clique_term[static_cast<std::size_t>(nf[k])] = s.cterm[k];
    }
    state.weights.node[static_cast<std::size_t>(i)] = s.wn;
    state.singleton_term[static_cast<std::size_t>(i)] = s.sterm;
}

// Local objective from the caches: singleton term of i plus clique terms of N_i.
inline double block_value(const ModelGraph& graph, const BoundState& state, int i) {
    double f = state.singleton_term[static_cast<std::size_t>(i)];
    for (int a : graph.factors_of[static_cast<std::size_t>(i)]) f += state.clique_term[static_cast<std::size_t>(a)];
    return f;
}

// Recompute the block's cached terms after an in-place candidate write;
// returns the new block value with the caches committed.
inline double refresh_block(const DiscreteModel& model, const ModelGraph& graph, BoundState& state, int i) {
    state.singleton_term[static_cast<std::size_t>(i)] = singleton_term_value(model, graph, state, i);
    double f = state.singleton_term[static_cast<std::size_t>(i)];
    for (int a : graph.factors_of[static_cast<std::size_t>(i)]) {
        state.clique_term[static_cast<std::size_t>(a)] = clique_term_value(model, state, a);
        f += state.clique_term[static_cast<std::size_t>(a)];
    }
    return f;
}

// Armijo-backtracked descent steps on the delta block of node i along the
// natural direction d_alpha = -c_alpha (log mu_i - log mu_alpha) with
// c_alpha = min(w_i, w_alpha).  Each clique contributes
// -c_alpha <mu_i - mu_alpha, log mu_i - log mu_alpha>, a symmetric KL,
// to <grad, d>, so it is always a descent direction; and because
// w log mu stays O(1) as w -> 0, its magnitude does not collapse near
// the simplex corners the way the raw Eq.-7 gradient does.
inline bool natural_delta_steps(const DiscreteModel& model, const ModelGraph& graph, BoundState& state,
                                const InferenceQuery& query, int i, const OptimizerConfig& cfg, int steps,
                                int max_backtracks) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    for (int step = 0; step < steps; ++step) {
        const double f0 = block_value(graph, state, i);
        BlockBeliefs b = block_beliefs(model, graph, state, query, i);
        const double wi = state.weights.node[static_cast<std::size_t>(i)];
        std::vector<std::vector<double>> d(nf.size());
        double m = 0.0;  // -<grad, d> >= 0
        for (std::size_t k = 0; k < nf.size(); ++k) {
            const double wa = state.weights.pair[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))];
            const double c = std::min(wi, wa);
            d[k].resize(b.mu_i.size());
            for (std::size_t x = 0; x < b.mu_i.size(); ++x) {
                double ld = b.log_mu_i[x] - b.log_marg[k][x];
                if (std::isnan(ld)) ld = 0.0;  // both cells empty
                double dv = std::clamp(-c * ld, -1e6, 1e6);
                d[k][x] = dv;
                m -= (b.mu_i[x] - b.clique_marg[k][x]) * dv;
            }
        }
        if (!(m > 1e-30)) return true; // delta-stationary

        BlockSnapshot snap = snapshot_block(model, graph, state, i);
        bool accepted = false;
        double eta = cfg.initial_step;
        for (int bt = 0; bt <= max_backtracks; ++bt, eta *= cfg.backtrack_factor) {
            for (std::size_t k = 0; k < nf.size(); ++k) {
                auto& delta = state.shifts.delta[static_cast<std::size_t>(nf[k])][snap.pos[k]];
                for (std::size_t x = 0; x < delta.size(); ++x) delta[x] = snap.delta[k][x] + eta * d[k][x];
            }
            const double f1 = refresh_block(model, graph, state, i);
            if (f1 <= f0 - cfg.armijo_c * eta * m && f1 <= f0) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            restore_block(graph, state, i, snap);
            return false;
        }
    }
    return true;
}

// delta_i^alpha <- gamma_i^alpha - (w_i^alpha / tau_i) sum_beta gamma_i^beta:
// the weighted analogue of the Eq.-9 star update.  At a WMB corner it is
// exactly the bucket-elimination message update, which is what makes the
// decomposed bound exact on trees.  Unguarded; returns the new block value.
inline double apply_matching(const DiscreteModel& model, const ModelGraph& graph, BoundState& state, int i,
                             double tau) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    std::vector<std::vector<double>> gamma = gamma_vectors(model, graph, state, i);
    const std::size_t d = gamma[0].size();
    std::vector<double> total(d, 0.0);
    for (const auto& gv : gamma)
        for (std::size_t x = 0; x < d; ++x) total[x] += gv[x];
    for (std::size_t k = 0; k < nf.size(); ++k) {
        const int a = nf[k];
        const auto pos = static_cast<std::size_t>(scope_position(model.factors[static_cast<std::size_t>(a)], i));
        const double share = state.weights.pair[static_cast<std::size_t>(a)][pos] / tau;
        auto& delta = state.shifts.delta[static_cast<std::size_t>(a)][pos];
        for (std::size_t x = 0; x < d; ++x) delta[x] = gamma[k][x] - share * total[x];
    }
    return refresh_block(model, graph, state, i);
}

// Node i's row of the WMB weight split: parents (cliques with a variable
// eliminated after i) share tau_i, children get zero; with no parents the
// singleton absorbs tau_i.
inline void wmb_weight_row(const DiscreteModel& model, const ModelGraph& graph, const EliminationOrder& order,
                           double tau, int i, double& wn, std::vector<double>& wp) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    wp.assign(nf.size(), 0.0);
    int parents = 0;
    for (std::size_t k = 0; k < nf.size(); ++k) {
        bool all_earlier = true;
        for (int j : model.factors[static_cast<std::size_t>(nf[k])].scope)
            if (j != i && order.rank[static_cast<std::size_t>(j)] > order.rank[static_cast<std::size_t>(i)])
                all_earlier = false;
        if (!all_earlier) {
            wp[k] = 1.0;
            ++parents;
        }
    }
    if (parents == 0) {
        wn = tau;
    } else {
        wn = 0.0;
        for (double& w : wp) w *= tau / double(parents);
    }
}

} // namespace detail

// One block of Armijo-backtracked updates for a sum node: inner_grad_steps
// gradient steps on delta_i, then one Eq.-10 weight step.  The weight phase
// carries a per-node step memory (eta_w): the multiplicative update shrinks
// like w^2 at unit step, so the accepted step is re-used and grown each sweep
// to keep corner convergence linear.  Only non-increasing steps are
// committed; a failed line search keeps the block unchanged and is reported
// through the return value.
inline bool sum_node_block_step(const DiscreteModel& model, const ModelGraph& graph, BoundState& state,
                                const InferenceQuery& query, int i, const OptimizerConfig& cfg,
                                double* eta_w_mem = nullptr) {
    const auto& nf = graph.factors_of[static_cast<std::size_t>(i)];
    if (nf.empty()) return true;
    const double tau = query.tau[static_cast<std::size_t>(i)];
    bool ok = true;

    // --- weighted matching proposal ----------------------------------------
    // Guarded star-style update; it minimizes the block exactly when x_i is
    // outermost in every clique, and is merely a proposal otherwise.  Unlike
    // the gradient step its progress does not vanish as the weights approach
    // the simplex boundary.
    {
        const double f0 = detail::block_value(graph, state, i);
        detail::BlockSnapshot snap = detail::snapshot_block(model, graph, state, i);
        if (detail::apply_matching(model, graph, state, i, tau) > f0) detail::restore_block(graph, state, i, snap);
    }

    // --- delta phase -----------------------------------------------------
    if (!detail::natural_delta_steps(model, graph, state, query, i, cfg, cfg.inner_grad_steps,
                                     cfg.max_backtracks))
        ok = false;

    // --- weight phase ------------------------------------------------------
    if (tau > 0.0) {
        const double wni = state.weights.node[static_cast<std::size_t>(i)];
        double cn;
        std::vector<double> cp;
        detail::wmb_weight_row(model, graph, state.order, tau, i, cn, cp);
        // distance to the exact corner (an already-snapped or WMB-initialized
        // node needs no trial) and current support size
        double dist0 = std::abs(wni - cn);
        int support = wni > kWeightZeroTol ? 1 : 0;
        for (std::size_t k = 0; k < nf.size(); ++k) {
            const double wa = state.weights.pair[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))];
            dist0 = std::max(dist0, std::abs(wa - cp[k]));
            if (wa > kWeightZeroTol) ++support;
        }
        // A node resting on a single-coordinate exact corner is weight-stationary
        // (Hbar equals the lone entropy, Eq.-11 residuals vanish): nothing to do.
        if (dist0 > 1e-12 || support > 1) {
        const double f0 = detail::block_value(graph, state, i);
        BlockBeliefs b = block_beliefs(model, graph, state, query, i);
        double m = 0.0;
        {
            double pg = wni * (b.h_i - b.h_bar);
            m += pg * pg;
            for (std::size_t k = 0; k < nf.size(); ++k) {
                const double wa = state.weights.pair[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                    scope_position(model.factors[static_cast<std::size_t>(nf[k])], i))];
                pg = wa * (b.h_cond[k] - b.h_bar);
                m += pg * pg;
            }
        }
        // Corner-snap trial: the mirror update follows the local entropy
        // gradient, which near the simplex boundary can point away from the
        // (often exactly tight) WMB corner -- singleton beliefs cool as w_i
        // shrinks and their entropy drops with them.  Proposing the corner
        // itself, with delta re-adapted, lets the block tunnel there whenever
        // it actually lowers the bound.
        bool snapped = false;
        {
            // target the floored corner, not the exact one: keeping every
            // weight positive leaves the block smooth so delta can still
            // reach moment matching there
            {
                const double fl = cfg.weight_floor * tau;
                double s = std::max(cn, fl);
                for (double& w : cp) s += (w = std::max(w, fl));
                const double scale = tau / s;
                cn = std::max(cn, fl) * scale;
                for (double& w : cp) w *= scale;
            }
            double dist = std::abs(state.weights.node[static_cast<std::size_t>(i)] - cn);
            for (std::size_t k = 0; k < nf.size(); ++k) {
                const auto pos = static_cast<std::size_t>(
                    scope_position(model.factors[static_cast<std::size_t>(nf[k])], i));
                dist = std::max(dist, std::abs(state.weights.pair[static_cast<std::size_t>(nf[k])][pos] - cp[k]));
            }
            if (std::min(dist, dist0) > 1e-12) {
                detail::BlockSnapshot snap = detail::snapshot_block(model, graph, state, i);
                state.weights.node[static_cast<std::size_t>(i)] = cn;
                for (std::size_t k = 0; k < nf.size(); ++k)
                    state.weights.pair[static_cast<std::size_t>(nf[k])][snap.pos[k]] = cp[k];
                detail::refresh_block(model, graph, state, i);
                detail::apply_matching(model, graph, state, i, tau);
                detail::natural_delta_steps(model, graph, state, query, i, cfg, cfg.inner_grad_steps, 12);
                if (detail::block_value(graph, state, i) <= f0 - 1e-12)
                    snapped = true;
                else
                    detail::restore_block(graph, state, i, snap);
            }
        }

        if (!snapped && m >= 1e-18) {
            detail::BlockSnapshot snap = detail::snapshot_block(model, graph, state, i);
            // start where the largest coordinate moves by a factor e: the
            // Eq.-10 exponent scales with w, so a fixed eta would anneal small
            // weights sublinearly and the corner would never be reached
            double maxexp = std::abs(snap.wn * (b.h_i - b.h_bar));
            for (std::size_t k = 0; k < nf.size(); ++k)
                maxexp = std::max(maxexp, std::abs(snap.wp[k] * (b.h_cond[k] - b.h_bar)));
            double eta0 = maxexp > 0.0 ? 1.0 / maxexp : cfg.initial_step;
            // eta memory acts as a trust region: grow on acceptance, shrink
            // persistently on rejection so repeatedly failing ladders get cheap
            if (eta_w_mem) eta0 = std::min(eta0, *eta_w_mem * 8.0);
            bool accepted = false;
            double eta = eta0;
            for (int bt = 0; bt < 6; ++bt, eta *= cfg.backtrack_factor) {
                detail::restore_block(graph, state, i, snap);
                std::vector<double> wp = snap.wp;
                double wn = snap.wn;
                exp_weight_update(wn, wp, b, eta, tau, cfg.weight_floor);
                state.weights.node[static_cast<std::size_t>(i)] = wn;
                for (std::size_t k = 0; k < nf.size(); ++k)
                    state.weights.pair[static_cast<std::size_t>(nf[k])][snap.pos[k]] = wp[k];
                detail::refresh_block(model, graph, state, i);
                // let delta re-adapt to the candidate weights before judging;
                // a large weight move always looks uphill until it does
                detail::natural_delta_steps(model, graph, state, query, i, cfg, 2, 8);
                const double f1 = detail::block_value(graph, state, i);
                if (f1 <= f0 - cfg.armijo_c * std::min(eta, 1.0) * m && f1 <= f0) {
                    accepted = true;
                    break;
                }
            }
            if (accepted) {
                if (eta_w_mem) *eta_w_mem = std::min(eta, 1e12);
            } else {
                detail::restore_block(graph, state, i, snap);
                if (eta_w_mem) *eta_w_mem = std::max(*eta_w_mem * 0.25, 1e-12);
                // a rejected weight step is not a line-search failure of the
                // block: delta progress above is kept
            }
        }
        }
    }
    return ok;
}

struct RunResult {
    BoundState state;
    ModelGraph graph;
    EliminationOrder order;
    std::vector<TraceRecord> trace;
    std::vector<int> best_config;
    std::optional<double> best_score;
    int sweeps = 0;
    int line_search_failures = 0;
};

namespace detail {

inline int worker_count(const OptimizerConfig& cfg) {
    if (!cfg.parallel) return 1;
    if (const char* env = std::getenv("POWERSUM_THREADS")) {
        int n = std::atoi(env);
        return n <= 0 ? 1 : n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(hw == 0 ? 1u : hw, 8u));
}

} // namespace detail

// Algorithm-1 driver: sweep the color classes, closed-form updates on max
// nodes, Armijo-searched gradient blocks on sum nodes.
inline RunResult run(const DiscreteModel& model, const InferenceQuery& query, const OptimizerConfig& cfg) {
    model.validate();
    RunResult res;
    res.graph = build_graph(model);
    res.order = constrained_min_fill_order(model, res.graph, query);
    SplitWeights w = (cfg.weight_init == WeightInit::wmb)
                         ? init_weights_wmb(model, res.graph, res.order, query)
                         : init_weights_uniform(model, res.graph, query);
    res.state = make_state(model, res.graph, res.order, std::move(w));

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    auto record = [&](int iter, bool ls_failed) {
        TraceRecord r;
        r.iteration = iter;
        r.bound = cached_bound(res.state);
        r.config = decode_local(model, res.graph, res.state, query);
        if (cfg.score_decodings && !r.config.empty())
            r.score = score_decoding(model, query, r.config, cfg.score_limit);
        r.elapsed_s = elapsed();
        r.line_search_failed = ls_failed;
        if (r.score && (!res.best_score || *r.score > *res.best_score)) {
            res.best_score = r.score;
            res.best_config = r.config;
        }
        res.trace.push_back(std::move(r));
    };

    std::vector<std::vector<int>> classes = color_schedule(res.graph);
    const int workers = detail::worker_count(cfg);
    std::vector<double> eta_w(static_cast<std::size_t>(model.num_vars), cfg.initial_step);
    record(0, false);
    double prev = res.trace.back().bound;
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        int failures = 0;
        for (const auto& cls : classes) {
            auto process = [&](int v) {
                if (query.is_max(v)) {
                    closed_form_block_update(model, res.graph, res.state, v);
                    return true;
                }
                return sum_node_block_step(model, res.graph, res.state, query, v, cfg,
                                           &eta_w[static_cast<std::size_t>(v)]);
            };
            if (workers <= 1 || static_cast<int>(cls.size()) <= 1) {
                for (int v : cls)
                    if (!process(v)) ++failures;
            } else {
                std::vector<std::thread> pool;
                std::vector<int> fail_per(static_cast<std::size_t>(workers), 0);
                for (int t = 0; t < workers; ++t) {
                    pool.emplace_back([&, t] {
                        for (std::size_t k = static_cast<std::size_t>(t); k < cls.size();
                             k += static_cast<std::size_t>(workers))
                            if (!process(cls[k])) ++fail_per[static_cast<std::size_t>(t)];
                    });
                }
                for (auto& th : pool) th.join();
                for (int f : fail_per) failures += f;
            }
        }
        res.line_search_failures += failures;
        res.sweeps = sweep;
        record(sweep, failures > 0);
        const double cur = res.trace.back().bound;
        if (std::abs(prev - cur) < cfg.rel_tol * std::max(1.0, std::abs(prev))) break;
        prev = cur;
    }
    res.state.value = cached_bound(res.state);
    return res;
}

} // namespace gdd

#endif
