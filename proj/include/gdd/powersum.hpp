#ifndef GDD_POWERSUM_HPP
#define GDD_POWERSUM_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gdd/tensor.hpp"

namespace gdd {

// Weights at or below this are treated as exact zeros (max operator).
inline constexpr double kWeightZeroTol = 1e-12;
// Log-domain tolerance for membership in an argmax set.
inline constexpr double kArgmaxTol = 1e-12;

inline double log_sum_exp(const std::vector<double>& v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v)
        if (x != kNegInf) s += std::exp(x - m);
    return m + std::log(s);
}

// log of the power sum with weight w over log-domain values:
// w > 0 -> w * logsumexp(v / w), w == 0 -> max(v).
inline double power_sum_scalar(const std::vector<double>& v, double w) {
    if (v.empty()) throw std::domain_error("power_sum_scalar: empty input");
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (w <= kWeightZeroTol || m == kNegInf) return m;
    double s = 0.0;
    for (double x : v)
        if (x != kNegInf) s += std::exp((x - m) / w);
    return m + w * std::log(s);
}

// Clique scope sorted earliest-eliminated first, with its split weights.
struct WeightedScope {
    std::vector<int> vars;       // variable ids, ascending elimination rank
    std::vector<int> dims;       // matching cardinalities
    std::vector<double> weights; // matching w_i^alpha
};

// partials[k] is the table over scope positions k..c-1; partials[c] is scalar.
struct PartialSums {
    std::vector<Tensor> z;
};

namespace detail {

// Power-sum over axis 0 (the slowest-varying axis).
inline Tensor reduce_front(const Tensor& in, double w) {
    const int d0 = in.dims[0];
    std::vector<int> out_dims(in.dims.begin() + 1, in.dims.end());
    Tensor out(out_dims);
    const std::size_t sfx = out.size();
    std::vector<double> col(static_cast<std::size_t>(d0));
    for (std::size_t j = 0; j < sfx; ++j) {
        for (int x = 0; x < d0; ++x) col[static_cast<std::size_t>(x)] = in.vals[x * sfx + j];
        out.vals[j] = power_sum_scalar(col, w);
    }
    return out;
}

} // namespace detail

struct EliminateResult {
    double value;
    PartialSums partials;
};

// Sequential power sums along the scope order; axes of `table` must follow ws.
inline EliminateResult eliminate(const Tensor& table, const WeightedScope& ws) {
    if (table.dims != ws.dims) throw std::invalid_argument("eliminate: dimension mismatch");
    PartialSums ps;
    ps.z.push_back(table);
    for (std::size_t k = 0; k < ws.vars.size(); ++k)
        ps.z.push_back(detail::reduce_front(ps.z.back(), ws.weights[k]));
    return {ps.z.back().vals[0], std::move(ps)};
}

struct CliqueBelief {
    Tensor joint;                    // probability domain, sums to 1
    std::vector<Tensor> cond_log;    // cond_log[k] over positions k..c-1
};

// Chain-rule beliefs from the partial sums: mu(x_k | suffix) = (Z_k/Z_{k+1})^{1/w_k}
// in the notation with z[0] the input table.  Zero-weight positions get a
// uniform-over-argmax conditional; all-(-inf) suffixes get a uniform one.
inline CliqueBelief clique_belief(const PartialSums& ps, const WeightedScope& ws) {
    const int c = static_cast<int>(ws.vars.size());
    CliqueBelief b;
    b.cond_log.resize(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
        const Tensor& zk = ps.z[static_cast<std::size_t>(k)];
        const Tensor& zk1 = ps.z[static_cast<std::size_t>(k) + 1];
        const int dk = zk.dims[0];
        const std::size_t sfx = zk1.size();
        Tensor cond(zk.dims, kNegInf);
        const double w = ws.weights[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < sfx; ++j) {
            if (zk1.vals[j] == kNegInf) {
                for (int x = 0; x < dk; ++x) cond.vals[x * sfx + j] = -std::log(double(dk));
            } else if (w <= kWeightZeroTol) {
                int m = 0;
                for (int x = 0; x < dk; ++x)
                    if (zk.vals[x * sfx + j] >= zk1.vals[j] - kArgmaxTol) ++m;
                for (int x = 0; x < dk; ++x)
                    if (zk.vals[x * sfx + j] >= zk1.vals[j] - kArgmaxTol)
                        cond.vals[x * sfx + j] = -std::log(double(m));
            } else {
                for (int x = 0; x < dk; ++x)
                    cond.vals[x * sfx + j] = (zk.vals[x * sfx + j] - zk1.vals[j]) / w;
            }
        }
        b.cond_log[static_cast<std::size_t>(k)] = std::move(cond);
    }
    // Joint by chain rule, then normalize away residual rounding.
    b.joint = Tensor(ws.dims);
    std::vector<int> mi;
    double total = 0.0;
    for (std::size_t idx = 0; idx < b.joint.size(); ++idx) {
        unravel(idx, ws.dims, mi);
        double lp = 0.0;
        for (int k = 0; k < c && lp != kNegInf; ++k) {
            const Tensor& cond = b.cond_log[static_cast<std::size_t>(k)];
            std::vector<int> sub(mi.begin() + k, mi.end());
            double lc = cond.vals[ravel(sub, cond.dims)];
            lp = (lc == kNegInf) ? kNegInf : lp + lc;
        }
        double p = (lp == kNegInf) ? 0.0 : std::exp(lp);
        b.joint.vals[idx] = p;
        total += p;
    }
    if (total <= 0.0) {
        for (double& p : b.joint.vals) p = 1.0 / double(b.joint.size());
    } else {
        for (double& p : b.joint.vals) p /= total;
    }
    return b;
}

// H_k = -sum_x mu(x) log mu(x_k | suffix), with 0 log 0 := 0.
inline std::vector<double> conditional_entropies(const CliqueBelief& b) {
    const int c = static_cast<int>(b.cond_log.size());
    std::vector<double> h(static_cast<std::size_t>(c), 0.0);
    std::vector<int> mi;
    for (std::size_t idx = 0; idx < b.joint.size(); ++idx) {
        double p = b.joint.vals[idx];
        if (p <= 0.0) continue;
        unravel(idx, b.joint.dims, mi);
        for (int k = 0; k < c; ++k) {
            const Tensor& cond = b.cond_log[static_cast<std::size_t>(k)];
            std::vector<int> sub(mi.begin() + k, mi.end());
            h[static_cast<std::size_t>(k)] -= p * cond.vals[ravel(sub, cond.dims)];
        }
    }
    for (double& x : h) x = std::max(x, 0.0);
    return h;
}

// gamma(x_keep): power-sum over every scope variable except `keep`, in
// elimination order.  Moving the kept axis last preserves the relative
// order of the eliminated ones.
inline std::vector<double> eliminate_all_but_one(const Tensor& table, const WeightedScope& ws,
                                                 int keep_pos) {
    const int c = static_cast<int>(ws.vars.size());
    if (keep_pos < 0 || keep_pos >= c) throw std::invalid_argument("eliminate_all_but_one: keep not in scope");
    if (table.dims != ws.dims) throw std::invalid_argument("eliminate_all_but_one: dimension mismatch");
    std::vector<int> perm;
    for (int k = 0; k < c; ++k)
        if (k != keep_pos) perm.push_back(k);
    perm.push_back(keep_pos);
    Tensor t = permute_axes(table, perm);
    for (int k = 0; k < c; ++k)
        if (k != keep_pos) t = detail::reduce_front(t, ws.weights[static_cast<std::size_t>(k)]);
    return t.vals;
}

inline double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return std::max(h, 0.0);
}

} // namespace gdd

#endif
