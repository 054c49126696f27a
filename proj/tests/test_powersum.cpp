#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gdd/oracle.hpp"
#include "gdd/powersum.hpp"

using namespace gdd;

namespace {

// 2x2 reference table used throughout the worked examples: theta = [[0,1],[1,0]].
Tensor xor_table() {
    Tensor t({2, 2});
    t.vals = {0.0, 1.0, 1.0, 0.0};
    return t;
}

WeightedScope scope2(double w0, double w1) { return {{0, 1}, {2, 2}, {w0, w1}}; }

// Brute-force power sum over a table, independent of the kernel under test.
double brute_power_sum(const Tensor& t, const std::vector<double>& w) {
    Tensor cur = t;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const int d0 = cur.dims[0];
        std::vector<int> rest(cur.dims.begin() + 1, cur.dims.end());
        Tensor next(rest);
        const std::size_t sfx = next.size();
        for (std::size_t j = 0; j < sfx; ++j) {
            if (w[k] <= 1e-12) {
                double m = kNegInf;
                for (int x = 0; x < d0; ++x) m = std::max(m, cur.vals[x * sfx + j]);
                next.vals[j] = m;
            } else {
                double m = kNegInf;
                for (int x = 0; x < d0; ++x) m = std::max(m, cur.vals[x * sfx + j]);
                if (m == kNegInf) {
                    next.vals[j] = kNegInf;
                } else {
                    double s = 0.0;
                    for (int x = 0; x < d0; ++x)
                        if (cur.vals[x * sfx + j] != kNegInf) s += std::exp((cur.vals[x * sfx + j] - m) / w[k]);
                    next.vals[j] = m + w[k] * std::log(s);
                }
            }
        }
        cur = next;
    }
    return cur.vals[0];
}

} // namespace

TEST_CASE("power_sum_scalar basic cases") {
    CHECK(power_sum_scalar({0.0, std::log(3.0)}, 1.0) == Catch::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(power_sum_scalar({0.5, 2.0, -1.0}, 0.0) == 2.0);
    CHECK(power_sum_scalar({0.0, std::log(3.0)}, 0.5) == Catch::Approx(0.5 * std::log(10.0)).epsilon(1e-12));
    CHECK(power_sum_scalar({kNegInf, kNegInf}, 1.0) == kNegInf);
    CHECK(power_sum_scalar({kNegInf, 1.0}, 1.0) == Catch::Approx(1.0));
    CHECK_THROWS_AS(power_sum_scalar({}, 1.0), std::domain_error);
}

TEST_CASE("power_sum_scalar limit consistency") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> vd(-3.0, 3.0), wd(0.01, 2.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(4);
        for (double& x : v) x = vd(rng);
        double m = *std::max_element(v.begin(), v.end());
        CHECK(power_sum_scalar(v, 1.0) == Catch::Approx(log_sum_exp(v)).margin(1e-14));
        CHECK(power_sum_scalar(v, 0.0) == m);
        double w = wd(rng);
        CHECK(std::abs(power_sum_scalar(v, w) - m) <= w * std::log(double(v.size())) + 1e-12);
    }
}

TEST_CASE("eliminate worked examples") {
    Tensor t = xor_table();
    CHECK(eliminate(t, scope2(1, 1)).value == Catch::Approx(std::log(2.0 + 2.0 * std::exp(1.0))).epsilon(1e-12));
    CHECK(eliminate(t, scope2(1, 0)).value == Catch::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));
    CHECK(eliminate(t, scope2(0, 0)).value == 1.0);
    CHECK_THROWS_AS(eliminate(t, WeightedScope{{0, 1}, {2, 3}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("eliminate matches brute force on random tables") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> vd(-2.0, 2.0), wd(0.0, 1.5);
    std::uniform_int_distribution<int> dd(1, 3), cd(1, 4);
    for (int t = 0; t < 300; ++t) {
        int c = cd(rng);
        WeightedScope ws;
        for (int k = 0; k < c; ++k) {
            ws.vars.push_back(k);
            ws.dims.push_back(dd(rng));
            ws.weights.push_back(t % 3 == 0 ? 0.0 : wd(rng));
        }
        Tensor table(ws.dims);
        for (double& x : table.vals) x = vd(rng);
        CHECK(eliminate(table, ws).value == Catch::Approx(brute_power_sum(table, ws.weights)).margin(1e-10));
    }
}

TEST_CASE("clique_belief worked examples") {
    SECTION("uniform table") {
        Tensor t({2, 2}, 0.0);
        CliqueBelief b = clique_belief(eliminate(t, scope2(1, 1)).partials, scope2(1, 1));
        for (double p : b.joint.vals) CHECK(p == Catch::Approx(0.25).epsilon(1e-12));
    }
    SECTION("xor table, sum weights") {
        WeightedScope ws = scope2(1, 1);
        CliqueBelief b = clique_belief(eliminate(xor_table(), ws).partials, ws);
        double z = 2.0 + 2.0 * std::exp(1.0);
        CHECK(b.joint.vals[0] == Catch::Approx(1.0 / z).epsilon(1e-9));    // theta=0
        CHECK(b.joint.vals[1] == Catch::Approx(std::exp(1.0) / z).epsilon(1e-9));
    }
    SECTION("zero-weight position with tied maxima is uniform over the argmax set") {
        WeightedScope ws = scope2(1, 0);
        CliqueBelief b = clique_belief(eliminate(xor_table(), ws).partials, ws);
        // both suffix values of Z_1 equal 1+e, so the x2 conditional is (0.5, 0.5)
        const Tensor& cond = b.cond_log[1];
        CHECK(std::exp(cond.vals[0]) == Catch::Approx(0.5).epsilon(1e-12));
        CHECK(std::exp(cond.vals[1]) == Catch::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("belief consistency properties") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> vd(-2.0, 2.0), wd(0.0, 1.5);
    std::uniform_int_distribution<int> dd(2, 3), cd(2, 3);
    for (int t = 0; t < 200; ++t) {
        int c = cd(rng);
        WeightedScope ws;
        for (int k = 0; k < c; ++k) {
            ws.vars.push_back(k);
            ws.dims.push_back(dd(rng));
            ws.weights.push_back(t % 4 == 0 ? 0.0 : wd(rng));
        }
        Tensor table(ws.dims);
        for (double& x : table.vals) x = vd(rng);
        CliqueBelief b = clique_belief(eliminate(table, ws).partials, ws);

        double total = 0.0;
        for (double p : b.joint.vals) total += p;
        CHECK(total == Catch::Approx(1.0).margin(1e-12));

        // joint equals product of conditionals pointwise
        std::vector<int> mi;
        for (std::size_t idx = 0; idx < b.joint.size(); ++idx) {
            unravel(idx, b.joint.dims, mi);
            double lp = 0.0;
            for (int k = 0; k < c; ++k) {
                std::vector<int> sub(mi.begin() + k, mi.end());
                double lc = b.cond_log[static_cast<std::size_t>(k)].vals[ravel(sub, b.cond_log[static_cast<std::size_t>(k)].dims)];
                lp = lc == kNegInf ? kNegInf : lp + lc;
            }
            double p = lp == kNegInf ? 0.0 : std::exp(lp);
            CHECK(b.joint.vals[idx] == Catch::Approx(p).margin(1e-12));
        }
    }
}

TEST_CASE("conditional entropies") {
    SECTION("uniform belief") {
        Tensor t({2, 2}, 0.0);
        WeightedScope ws = scope2(1, 1);
        auto h = conditional_entropies(clique_belief(eliminate(t, ws).partials, ws));
        CHECK(h[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(h[1] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SECTION("point mass") {
        Tensor t({2, 2}, kNegInf);
        t.vals[3] = 0.0;
        WeightedScope ws = scope2(1, 1);
        auto h = conditional_entropies(clique_belief(eliminate(t, ws).partials, ws));
        CHECK(h[0] == Catch::Approx(0.0).margin(1e-12));
        CHECK(h[1] == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("xor table") {
        WeightedScope ws = scope2(1, 1);
        auto h = conditional_entropies(clique_belief(eliminate(xor_table(), ws).partials, ws));
        double p = 1.0 / (1.0 + std::exp(1.0));
        double hb = -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
        CHECK(h[0] == Catch::Approx(hb).epsilon(1e-7)); // binary entropy of 1/(1+e)
        CHECK(h[0] == Catch::Approx(0.5822031).margin(1e-6));
    }
}

TEST_CASE("eliminate_all_but_one") {
    SECTION("column log-sums") {
        auto g = eliminate_all_but_one(xor_table(), scope2(1, 1), 1);
        CHECK(g[0] == Catch::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));
        CHECK(g[1] == Catch::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));
    }
    SECTION("row log-sums on the asymmetric table") {
        Tensor t({2, 2});
        t.vals = {0.0, 0.0, 0.0, 2.0};
        auto g = eliminate_all_but_one(t, scope2(1, 1), 0);
        CHECK(g[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(g[1] == Catch::Approx(std::log(1.0 + std::exp(2.0))).epsilon(1e-12));
    }
    SECTION("unary clique returns the table itself") {
        Tensor t({3});
        t.vals = {0.5, -1.0, 2.0};
        auto g = eliminate_all_but_one(t, {{0}, {3}, {1.0}}, 0);
        CHECK(g == t.vals);
    }
    CHECK_THROWS_AS(eliminate_all_but_one(xor_table(), scope2(1, 1), 2), std::invalid_argument);
}

TEST_CASE("gradient identity: d value / d entry = belief") {
    std::mt19937 rng(47);
    std::uniform_real_distribution<double> vd(-1.5, 1.5), wd(0.1, 1.2);
    for (int t = 0; t < 25; ++t) {
        WeightedScope ws;
        for (int k = 0; k < 3; ++k) {
            ws.vars.push_back(k);
            ws.dims.push_back(2);
            ws.weights.push_back(wd(rng));
        }
        Tensor table(ws.dims);
        for (double& x : table.vals) x = vd(rng);
        CliqueBelief b = clique_belief(eliminate(table, ws).partials, ws);
        const double h = 1e-6;
        for (std::size_t e = 0; e < table.size(); ++e) {
            Tensor tp = table, tm = table;
            tp.vals[e] += h;
            tm.vals[e] -= h;
            double fd = (eliminate(tp, ws).value - eliminate(tm, ws).value) / (2.0 * h);
            CHECK(fd == Catch::Approx(b.joint.vals[e]).margin(1e-5));
        }
    }
}

TEST_CASE("weight gradient identity: d value / d w_k = H_k") {
    std::mt19937 rng(53);
    std::uniform_real_distribution<double> vd(-1.5, 1.5), wd(0.05, 1.2);
    for (int t = 0; t < 25; ++t) {
        WeightedScope ws;
        for (int k = 0; k < 3; ++k) {
            ws.vars.push_back(k);
            ws.dims.push_back(2);
            ws.weights.push_back(wd(rng));
        }
        Tensor table(ws.dims);
        for (double& x : table.vals) x = vd(rng);
        auto h_an = conditional_entropies(clique_belief(eliminate(table, ws).partials, ws));
        const double h = 1e-6;
        for (std::size_t k = 0; k < ws.weights.size(); ++k) {
            WeightedScope wp = ws, wm = ws;
            wp.weights[k] += h;
            wm.weights[k] -= h;
            double fd = (eliminate(table, wp).value - eliminate(table, wm).value) / (2.0 * h);
            double rel = std::abs(fd - h_an[k]) / std::max(std::abs(fd), 1e-4);
            CHECK(rel <= 1e-5);
        }
    }
}

TEST_CASE("axis permutation invariance") {
    std::mt19937 rng(59);
    std::uniform_real_distribution<double> vd(-2.0, 2.0);
    Tensor t({2, 3, 2});
    for (double& x : t.vals) x = vd(rng);
    WeightedScope ws{{0, 1, 2}, {2, 3, 2}, {0.7, 0.4, 1.1}};
    double ref = eliminate(t, ws).value;
    // permuting table axes together with scope metadata leaves the value fixed
    std::vector<int> perm = {2, 0, 1};
    Tensor tp = permute_axes(t, perm);
    // permuted axis layout but the same elimination sequence
    std::vector<int> inv(3);
    for (int j = 0; j < 3; ++j) inv[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = j;
    Tensor back = permute_axes(tp, inv);
    CHECK(eliminate(back, ws).value == Catch::Approx(ref).margin(1e-12));
}
