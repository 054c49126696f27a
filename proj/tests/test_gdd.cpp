#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gdd/checks.hpp"
#include "gdd/gdd.hpp"
#include "gdd/oracle.hpp"

using namespace gdd;

namespace {

DiscreteModel two_var_model() {
    DiscreteModel m;
    m.num_vars = 2;
    m.cards = {2, 2};
    Factor f;
    f.scope = {0, 1};
    f.table = Tensor({2, 2});
    f.table.vals = {0, 1, 1, 0};
    m.factors.push_back(std::move(f));
    return m;
}

// x1 -- x2 -- x3 chain used by the closed-form worked example.
DiscreteModel chain_model() {
    DiscreteModel m;
    m.num_vars = 3;
    m.cards = {2, 2, 2};
    Factor fa;
    fa.scope = {0, 1};
    fa.table = Tensor({2, 2});
    fa.table.vals = {0, 1, 1, 0};
    m.factors.push_back(std::move(fa));
    Factor fb;
    fb.scope = {1, 2};
    fb.table = Tensor({2, 2});
    fb.table.vals = {0, 0, 0, 2};
    m.factors.push_back(std::move(fb));
    return m;
}

} // namespace

TEST_CASE("color_schedule") {
    SECTION("4-chain uses two colors") {
        DiscreteModel m;
        m.num_vars = 4;
        m.cards.assign(4, 2);
        for (int k = 0; k < 3; ++k) {
            Factor f;
            f.scope = {k, k + 1};
            f.table = Tensor({2, 2}, 0.0);
            m.factors.push_back(std::move(f));
        }
        auto classes = color_schedule(build_graph(m));
        REQUIRE(classes.size() == 2);
        CHECK(classes[0] == std::vector<int>{0, 2});
        CHECK(classes[1] == std::vector<int>{1, 3});
    }
    SECTION("one clique over n variables forces n singleton classes") {
        DiscreteModel m;
        m.num_vars = 3;
        m.cards.assign(3, 2);
        Factor f;
        f.scope = {0, 1, 2};
        f.table = Tensor({2, 2, 2}, 0.0);
        m.factors.push_back(std::move(f));
        auto classes = color_schedule(build_graph(m));
        REQUIRE(classes.size() == 3);
        for (const auto& c : classes) CHECK(c.size() == 1);
    }
    SECTION("classes are independent sets covering all variables") {
        std::mt19937 rng(13);
        for (int t = 0; t < 30; ++t) {
            DiscreteModel m = random_model(rng, 8, 3, 8);
            ModelGraph g = build_graph(m);
            auto classes = color_schedule(g);
            std::vector<int> seen(static_cast<std::size_t>(m.num_vars), 0);
            for (const auto& cls : classes)
                for (std::size_t a = 0; a < cls.size(); ++a) {
                    ++seen[static_cast<std::size_t>(cls[a])];
                    for (std::size_t b = a + 1; b < cls.size(); ++b)
                        CHECK(!g.adjacency[static_cast<std::size_t>(cls[a])].count(cls[b]));
                }
            for (int s : seen) CHECK(s == 1);
        }
    }
}

TEST_CASE("closed_form_block_update worked chain example") {
    DiscreteModel m = chain_model();
    ModelGraph g = build_graph(m);
    InferenceQuery q{{1.0, 0.0, 1.0}};
    EliminationOrder o = make_order({0, 2, 1});
    BoundState s = make_state(m, g, o, init_weights_wmb(m, g, o, q));
    REQUIRE(s.weights.pair[0][0] == 1.0); // w_1^alpha
    REQUIRE(s.weights.pair[1][1] == 1.0); // w_3^beta

    auto gamma = gamma_vectors(m, g, s, 1);
    REQUIRE(gamma.size() == 2);
    CHECK(gamma[0][0] == Catch::Approx(1.3132617).margin(1e-6));
    CHECK(gamma[0][1] == Catch::Approx(1.3132617).margin(1e-6));
    CHECK(gamma[1][0] == Catch::Approx(0.6931472).margin(1e-6));
    CHECK(gamma[1][1] == Catch::Approx(2.1269280).margin(1e-6));

    double before = cached_bound(s);
    closed_form_block_update(m, g, s, 1);
    double after = cached_bound(s);
    CHECK(after <= before + 1e-12);

    CHECK(s.shifts.delta[0][1][0] == Catch::Approx(0.6444590).margin(1e-6));
    CHECK(s.shifts.delta[0][1][1] == Catch::Approx(0.1665318).margin(1e-6));
    CHECK(s.shifts.delta[1][0][0] == Catch::Approx(0.0243435).margin(1e-6));
    CHECK(s.shifts.delta[1][0][1] == Catch::Approx(0.9801981).margin(1e-6));

    // Prop I.1 matching: gamma - delta agrees across cliques with sum of deltas
    auto total = delta_sum(m, g, s, 1);
    CHECK(total[0] == Catch::Approx(0.6688025).margin(1e-6));
    CHECK(total[1] == Catch::Approx(1.1467299).margin(1e-6));
    for (int x = 0; x < 2; ++x) {
        CHECK(gamma[0][static_cast<std::size_t>(x)] - s.shifts.delta[0][1][static_cast<std::size_t>(x)] ==
              Catch::Approx(total[static_cast<std::size_t>(x)]).margin(1e-9));
        CHECK(gamma[1][static_cast<std::size_t>(x)] - s.shifts.delta[1][0][static_cast<std::size_t>(x)] ==
              Catch::Approx(total[static_cast<std::size_t>(x)]).margin(1e-9));
    }
}

TEST_CASE("closed_form_block_update single neighbor halves gamma") {
    DiscreteModel m = two_var_model();
    ModelGraph g = build_graph(m);
    InferenceQuery q{{1.0, 0.0}};
    EliminationOrder o = make_order({0, 1});
    BoundState s = make_state(m, g, o, init_weights_wmb(m, g, o, q));
    auto gamma = gamma_vectors(m, g, s, 1);
    closed_form_block_update(m, g, s, 1);
    for (int x = 0; x < 2; ++x)
        CHECK(s.shifts.delta[0][1][static_cast<std::size_t>(x)] ==
              Catch::Approx(gamma[0][static_cast<std::size_t>(x)] / 2.0).margin(1e-12));
}

TEST_CASE("closed_form matching condition on random models") {
    std::mt19937 rng(19);
    for (int t = 0; t < 50; ++t) {
        DiscreteModel m = random_model(rng, 5, 3, 5);
        ModelGraph g = build_graph(m);
        InferenceQuery q = random_mixed_query(rng, m.num_vars);
        EliminationOrder o = constrained_min_fill_order(m, g, q);
        BoundState s = make_state(m, g, o, init_weights_wmb(m, g, o, q));
        for (int i : q.max_set()) {
            const auto& nf = g.factors_of[static_cast<std::size_t>(i)];
            if (nf.empty()) continue;
            double before = cached_bound(s);
            closed_form_block_update(m, g, s, i);
            CHECK(cached_bound(s) <= before + 1e-10);
            auto gamma = gamma_vectors(m, g, s, i);
            auto total = delta_sum(m, g, s, i);
            for (std::size_t k = 0; k < nf.size(); ++k) {
                const auto& d = s.shifts.delta[static_cast<std::size_t>(nf[k])][static_cast<std::size_t>(
                    scope_position(m.factors[static_cast<std::size_t>(nf[k])], i))];
                for (std::size_t x = 0; x < d.size(); ++x)
                    CHECK(gamma[k][x] - d[x] == Catch::Approx(total[x]).margin(1e-9));
            }
        }
    }
}

TEST_CASE("delta_gradient") {
    SECTION("uniform model with interior weights is stationary") {
        DiscreteModel m = two_var_model();
        m.factors[0].table.vals.assign(4, 0.7);
        ModelGraph g = build_graph(m);
        InferenceQuery q = all_sum_query(2);
        BoundState s = make_state(m, g, make_order({0, 1}), init_weights_uniform(m, g, q));
        BlockBeliefs b = block_beliefs(m, g, s, q, 0);
        for (const auto& gv : delta_gradient(b))
            for (double x : gv) CHECK(x == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("matches a finite difference of L") {
        DiscreteModel m = two_var_model();
        ModelGraph g = build_graph(m);
        InferenceQuery q = all_sum_query(2);
        BoundState s = make_state(m, g, make_order({0, 1}), init_weights_uniform(m, g, q));
        // interior split w_1 = w_1^alpha = 0.5
        BlockBeliefs b = block_beliefs(m, g, s, q, 0);
        auto grad = delta_gradient(b);
        for (std::size_t x = 0; x < 2; ++x) {
            auto f = [&](double v) {
                BoundState s2 = s;
                s2.shifts.delta[0][0][x] = v;
                return evaluate_bound(m, g, s2);
            };
            double fd = finite_diff(f, 0.0, 1e-6);
            CHECK(grad[0][x] == Catch::Approx(fd).margin(1e-6));
        }
        CHECK(b.mu_i[0] == Catch::Approx(0.5).margin(1e-12)); // delta sum is flat
    }
}

TEST_CASE("weight_gradient entropies") {
    DiscreteModel m = two_var_model();
    ModelGraph g = build_graph(m);
    InferenceQuery q = all_sum_query(2);
    BoundState s = make_state(m, g, make_order({0, 1}), init_weights_uniform(m, g, q));
    SECTION("uniform binary beliefs give ln 2 everywhere") {
        DiscreteModel u = m;
        u.factors[0].table.vals.assign(4, 0.0);
        ModelGraph ug = build_graph(u);
        BoundState us = make_state(u, ug, make_order({0, 1}), init_weights_uniform(u, ug, q));
        BlockBeliefs b = block_beliefs(u, ug, us, q, 0);
        WeightGradient wg = weight_gradient(b);
        CHECK(wg.node == Catch::Approx(std::log(2.0)).margin(1e-12));
        CHECK(wg.pair[0] == Catch::Approx(std::log(2.0)).margin(1e-12));
        CHECK(b.h_i - b.h_bar == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("simplex-feasible finite difference") {
        BlockBeliefs b = block_beliefs(m, g, s, q, 0);
        auto f = [&](double eps) {
            BoundState s2 = s;
            s2.weights.node[0] -= eps;
            s2.weights.pair[0][0] += eps;
            return evaluate_bound(m, g, s2);
        };
        double fd = finite_diff(f, 0.0, 1e-6);
        CHECK(b.h_cond[0] - b.h_i == Catch::Approx(fd).margin(1e-6));
    }
}

TEST_CASE("exp_weight_update") {
    BlockBeliefs b;
    b.h_i = std::log(2.0);
    b.h_cond = {0.0};
    b.h_bar = 0.5 * std::log(2.0); // 0.3465736 for w=(0.5,0.5)
    double wn = 0.5;
    std::vector<double> wp = {0.5};
    SECTION("eta = 0 is the identity") {
        exp_weight_update(wn, wp, b, 0.0, 1.0, 1e-8);
        CHECK(wn == Catch::Approx(0.5).margin(1e-15));
        CHECK(wp[0] == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("equal entropies are a fixed point") {
        BlockBeliefs eb;
        eb.h_i = 0.4;
        eb.h_cond = {0.4};
        eb.h_bar = 0.4;
        exp_weight_update(wn, wp, eb, 1.0, 1.0, 1e-8);
        CHECK(wn == Catch::Approx(0.5).margin(1e-15));
        CHECK(wp[0] == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("worked example") {
        exp_weight_update(wn, wp, b, 1.0, 1.0, 1e-8);
        // factors 0.5*exp(-/+ 0.5*hbar) normalized: (sqrt(2)-1, 2-sqrt(2))
        CHECK(wn == Catch::Approx(0.4142136).margin(1e-6));
        CHECK(wp[0] == Catch::Approx(0.5857864).margin(1e-6));
        CHECK(wn + wp[0] == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("zero weights stay zero") {
        wn = 0.0;
        wp = {1.0};
        exp_weight_update(wn, wp, b, 1.0, 1.0, 1e-8);
        CHECK(wn == 0.0);
        CHECK(wp[0] == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("sum_node_block_step never increases the bound") {
    std::mt19937 rng(23);
    for (int t = 0; t < 120; ++t) {
        DiscreteModel m = random_model(rng, 3, 3, 3);
        ModelGraph g = build_graph(m);
        InferenceQuery q = all_sum_query(m.num_vars);
        EliminationOrder o = constrained_min_fill_order(m, g, q);
        BoundState s = make_state(m, g, o, init_weights_uniform(m, g, q));
        OptimizerConfig cfg;
        for (int i = 0; i < m.num_vars; ++i) {
            double before = cached_bound(s);
            sum_node_block_step(m, g, s, q, i, cfg);
            double after = cached_bound(s);
            CHECK(after <= before + 1e-12);
            // caches stay coherent with a full recomputation
            BoundState copy = s;
            CHECK(evaluate_bound(m, g, copy) == Catch::Approx(after).margin(1e-10));
        }
    }
}

TEST_CASE("moment matching at convergence on the 2-var example") {
    DiscreteModel m = two_var_model();
    InferenceQuery q = all_sum_query(2);
    OptimizerConfig cfg;
    cfg.max_sweeps = 100;
    cfg.rel_tol = 1e-14;
    cfg.weight_init = WeightInit::uniform;
    RunResult r = run(m, q, cfg);
    for (int i = 0; i < 2; ++i) {
        BlockBeliefs b = block_beliefs(m, r.graph, r.state, q, i);
        for (std::size_t x = 0; x < b.mu_i.size(); ++x)
            CHECK(std::abs(b.mu_i[x] - b.clique_marg[0][x]) <= 1e-6);
    }
    CHECK(r.state.value >= exact_weighted_logZ(m, q, r.order) - 1e-9);
}

TEST_CASE("run: exactness") {
    SECTION("pure MAP on a 2-node tree reaches the oracle") {
        DiscreteModel m = two_var_model();
        InferenceQuery q = all_max_query(2);
        OptimizerConfig cfg;
        RunResult r = run(m, q, cfg);
        CHECK(r.state.value == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("single-clique model is exact at iteration 0") {
        DiscreteModel m = two_var_model();
        InferenceQuery q = all_sum_query(2);
        OptimizerConfig cfg;
        RunResult r = run(m, q, cfg);
        REQUIRE(!r.trace.empty());
        CHECK(r.trace[0].bound == Catch::Approx(exact_weighted_logZ(m, q, r.order)).margin(1e-9));
    }
    SECTION("random trees: pure sum and pure max converge to the oracle") {
        std::mt19937 rng(31);
        for (int t = 0; t < 10; ++t) {
            DiscreteModel m = random_tree_model(rng, 3 + t % 8, 3);
            for (InferenceQuery q : {all_sum_query(m.num_vars), all_max_query(m.num_vars)}) {
                OptimizerConfig cfg;
                cfg.max_sweeps = 200;
                cfg.rel_tol = 1e-12;
                cfg.score_decodings = false;
                RunResult r = run(m, q, cfg);
                double oracle = exact_weighted_logZ(m, q, r.order);
                CHECK(r.state.value == Catch::Approx(oracle).margin(1e-6));
                CHECK(r.state.value >= oracle - 1e-9);
            }
        }
    }
}

TEST_CASE("run: anytime and monotone on a mixed corpus") {
    CorpusReport rep = check_corpus(43, 25, 60, false);
    CHECK(rep.monotone);
    CHECK(rep.anytime);
    CHECK(rep.models == 25);
}

TEST_CASE("run: parallel trace equals the sequential trace") {
    CorpusReport rep = check_corpus(47, 10, 30, true);
    CHECK(rep.parallel_match);
    CHECK(rep.worst_parallel_diff <= 1e-12);
}

TEST_CASE("kkt residuals at convergence") {
    KktReport rep = check_kkt(53, 5);
    CHECK(rep.worst_kkt <= 1e-5);
    CHECK(rep.worst_moment <= 1e-5);
}
