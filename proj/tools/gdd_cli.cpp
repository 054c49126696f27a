// Command-line front end: `gdd solve` runs the optimizer on a UAI model and
// emits a trace plus a result JSON; `gdd check` runs the oracle-backed
// property suites.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gdd/checks.hpp"
#include "gdd/decode.hpp"
#include "gdd/gdd.hpp"
#include "gdd/io.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized dual decomposition for power-sum inference"};
    app.require_subcommand(1);

    // --- solve ------------------------------------------------------------
    auto* solve = app.add_subcommand("solve", "optimize the decomposed bound on a UAI model");
    std::string model_path, query_path, trace_path, result_path = "result.json", format = "csv", mode = "mmap";
    std::string state_dump_path;
    double max_frac = 0.5;
    bool use_oracle = false;
    gdd::OptimizerConfig cfg;
    solve->add_option("model", model_path, "UAI MARKOV model file")->required();
    solve->add_option("--mode", mode, "sum | max | mmap")->check(CLI::IsMember({"sum", "max", "mmap"}));
    solve->add_option("--query", query_path, "query file: k i1 ... ik (max set)");
    solve->add_option("--max-frac", max_frac, "fraction of max nodes for seeded mmap queries");
    solve->add_option("--seed", cfg.seed, "seed for the random max-node selection");
    solve->add_option("--trace", trace_path, "trace output path");
    solve->add_option("--result", result_path, "result JSON path");
    solve->add_option("--format", format, "trace format")->check(CLI::IsMember({"csv", "json"}));
    solve->add_option("--max-sweeps", cfg.max_sweeps, "sweep limit");
    solve->add_option("--rel-tol", cfg.rel_tol, "relative bound-change stopping tolerance");
    solve->add_option("--inner-steps", cfg.inner_grad_steps, "gradient steps per sum-node block");
    solve->add_option("--step", cfg.initial_step, "initial line-search step");
    solve->add_flag("--parallel", cfg.parallel, "colored parallel sweeps (POWERSUM_THREADS caps workers)");
    solve->add_flag("--oracle", use_oracle, "compare against the brute-force oracle (exit 2 if over capacity)");
    solve->add_flag("--no-score", [&cfg](std::int64_t) { cfg.score_decodings = false; },
                    "skip per-sweep decoding scores");
    solve->add_option("--dump-state", state_dump_path, "write final (delta, w) state JSON");

    // --- check ------------------------------------------------------------
    auto* check = app.add_subcommand("check", "run oracle-backed property suites");
    std::vector<std::string> suites;
    unsigned check_seed = 7;
    int trials = 1000, num_models = 50;
    check->add_option("suites", suites, "holder gradients monotone anytime kkt parallel (default: all)");
    check->add_option("--seed", check_seed, "suite seed");
    check->add_option("--trials", trials, "trials for the holder/gradient suites");
    check->add_option("--models", num_models, "corpus size for monotone/anytime/kkt/parallel");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) {
            gdd::DiscreteModel model = gdd::parse_uai(read_file(model_path));
            gdd::InferenceQuery query;
            if (!query_path.empty())
                query = gdd::parse_query(read_file(query_path), model);
            else if (mode == "sum")
                query = gdd::all_sum_query(model.num_vars);
            else if (mode == "max")
                query = gdd::all_max_query(model.num_vars);
            else
                query = gdd::random_mmap_query(model.num_vars, max_frac, cfg.seed);

            gdd::RunResult res = gdd::run(model, query, cfg);
            if (!trace_path.empty()) write_file(trace_path, gdd::write_trace(res.trace, format));
            if (!state_dump_path.empty()) write_file(state_dump_path, gdd::state_to_json(res.state).dump(2));

            const gdd::TraceRecord& last = res.trace.back();
            gdd::ParameterCensus census = gdd::parameter_census(model);
            nlohmann::json result;
            result["bound"] = res.state.value;
            result["sweeps"] = res.sweeps;
            result["wall_time_s"] = last.elapsed_s;
            result["decoded_config"] = last.config;
            result["decoded_score"] = gdd::trace_record_json(last)["score"];
            result["best_config"] = res.best_config;
            if (res.best_score)
                result["best_score"] = (*res.best_score == gdd::kNegInf) ? nlohmann::json("-inf")
                                                                         : nlohmann::json(*res.best_score);
            result["line_search_failures"] = res.line_search_failures;
            result["census"] = {{"pairs", census.pairs},
                                {"shift_scalars", census.shift_scalars},
                                {"clique_weights", census.clique_weights},
                                {"singleton_weights", census.singleton_weights}};
            if (use_oracle) {
                try {
                    double phi = gdd::exact_weighted_logZ(model, query, res.order);
                    result["oracle"] = phi;
                    result["gap"] = res.state.value - phi;
                } catch (const gdd::CapacityError& e) {
                    std::cerr << "error: --oracle: " << e.what() << "\n";
                    return 2;
                }
            }
            write_file(result_path, result.dump(2) + "\n");
            std::cout << "bound " << std::setprecision(10) << res.state.value << " after " << res.sweeps
                      << " sweeps\n";
            return 0;
        }

        // check
        if (suites.empty()) suites = {"holder", "gradients", "monotone", "anytime", "kkt", "parallel"};
        bool all_pass = true;
        bool corpus_done = false;
        for (const std::string& s : suites) {
            gdd::SuiteReport rep;
            if (s == "holder")
                rep = gdd::check_holder(check_seed, trials);
            else if (s == "gradients")
                rep = gdd::check_gradients(check_seed, std::max(1, trials / 20));
            else if (s == "monotone" || s == "anytime") {
                if (corpus_done) continue;
                corpus_done = true;
                rep = gdd::check_monotone_anytime(check_seed, num_models);
            } else if (s == "kkt")
                rep = gdd::check_kkt_suite(check_seed, std::min(num_models, 10));
            else if (s == "parallel")
                rep = gdd::check_parallel(check_seed, num_models);
            else {
                std::cerr << "error: unknown suite '" << s << "'\n";
                return 1;
            }
            std::cout << (rep.pass ? "PASS " : "FAIL ") << rep.detail << "\n";
            all_pass = all_pass && rep.pass;
        }
        return all_pass ? 0 : 1;
    } catch (const gdd::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
