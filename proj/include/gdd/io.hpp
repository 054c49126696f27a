#ifndef GDD_IO_HPP
#define GDD_IO_HPP

#include <cctype>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdd/model.hpp"

namespace gdd {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-sweep optimizer output: the anytime contract.
struct TraceRecord {
    int iteration = 0;
    double bound = 0.0;
    std::vector<int> config;            // states of the max set, ascending variable order
    std::optional<double> score;        // Q(x_B); nullopt = unevaluated
    double elapsed_s = 0.0;
    bool line_search_failed = false;
};

namespace detail {

class Tokenizer {
  public:
    explicit Tokenizer(std::string text) : in_(std::move(text)) {}

    std::string next(const char* what) {
        std::string tok;
        if (!(in_ >> tok)) throw ParseError(std::string("unexpected end of input, expected ") + what);
        ++count_;
        return tok;
    }
    long next_int(const char* what) {
        std::string tok = next(what);
        try {
            std::size_t pos = 0;
            long v = std::stol(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ParseError("token " + std::to_string(count_) + ": expected integer " + what + ", got '" + tok + "'");
        }
    }
    double next_real(const char* what) {
        std::string tok = next(what);
        try {
            std::size_t pos = 0;
            double v = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ParseError("token " + std::to_string(count_) + ": expected number " + what + ", got '" + tok + "'");
        }
    }
    bool at_end() {
        std::string tok;
        return !(in_ >> tok);
    }

  private:
    std::istringstream in_;
    long count_ = 0;
};

inline std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

} // namespace detail

// UAI MARKOV reader.  Tables are linear-domain in the file, fastest-varying
// last scope index; entries are stored as logs, with 0 -> -inf.
inline DiscreteModel parse_uai(const std::string& text) {
    detail::Tokenizer tok(text);
    std::string kind = tok.next("preamble keyword");
    if (detail::upper(kind) != "MARKOV")
        throw ParseError("unsupported preamble '" + kind + "' (only MARKOV)");
    DiscreteModel m;
    m.num_vars = static_cast<int>(tok.next_int("variable count"));
    if (m.num_vars < 0) throw ParseError("negative variable count");
    m.cards.resize(static_cast<std::size_t>(m.num_vars));
    for (int i = 0; i < m.num_vars; ++i) {
        m.cards[static_cast<std::size_t>(i)] = static_cast<int>(tok.next_int("cardinality"));
        if (m.cards[static_cast<std::size_t>(i)] < 1) throw ParseError("cardinality < 1");
    }
    long nf = tok.next_int("factor count");
    if (nf < 0) throw ParseError("negative factor count");
    m.factors.resize(static_cast<std::size_t>(nf));
    for (long a = 0; a < nf; ++a) {
        long arity = tok.next_int("factor arity");
        if (arity < 1) throw ParseError("factor arity < 1");
        Factor& f = m.factors[static_cast<std::size_t>(a)];
        std::vector<int> dims;
        for (long p = 0; p < arity; ++p) {
            int v = static_cast<int>(tok.next_int("scope index"));
            if (v < 0 || v >= m.num_vars) throw ParseError("scope index out of range in factor " + std::to_string(a));
            f.scope.push_back(v);
            dims.push_back(m.cards[static_cast<std::size_t>(v)]);
        }
        f.table = Tensor(dims);
    }
    for (long a = 0; a < nf; ++a) {
        Factor& f = m.factors[static_cast<std::size_t>(a)];
        long n = tok.next_int("table entry count");
        if (n != static_cast<long>(f.table.size()))
            throw ParseError("factor " + std::to_string(a) + ": table length " + std::to_string(n) +
                             " != scope product " + std::to_string(f.table.size()));
        for (long e = 0; e < n; ++e) {
            double v = tok.next_real("table entry");
            if (v < 0.0) throw ParseError("factor " + std::to_string(a) + ": negative potential");
            f.table.vals[static_cast<std::size_t>(e)] = (v == 0.0) ? kNegInf : std::log(v);
        }
    }
    m.validate();
    return m;
}

// Debug writer; parse_uai(write_uai(m)) round-trips the model.
inline std::string write_uai(const DiscreteModel& m) {
    std::ostringstream out;
    out.precision(17);
    out << "MARKOV\n" << m.num_vars << "\n";
    for (int i = 0; i < m.num_vars; ++i) out << m.cards[static_cast<std::size_t>(i)] << (i + 1 < m.num_vars ? " " : "");
    out << "\n" << m.factors.size() << "\n";
    for (const Factor& f : m.factors) {
        out << f.scope.size();
        for (int v : f.scope) out << " " << v;
        out << "\n";
    }
    for (const Factor& f : m.factors) {
        out << f.table.size() << "\n";
        for (std::size_t e = 0; e < f.table.size(); ++e)
            out << (f.table.vals[e] == kNegInf ? 0.0 : std::exp(f.table.vals[e])) << (e + 1 < f.table.size() ? " " : "\n");
    }
    return out.str();
}

// Query file: "k i1 ... ik" listing the max set B.
inline InferenceQuery parse_query(const std::string& text, const DiscreteModel& model) {
    detail::Tokenizer tok(text);
    long k = tok.next_int("max-set size");
    if (k < 0 || k > model.num_vars) throw ParseError("query: bad max-set size");
    InferenceQuery q = all_sum_query(model.num_vars);
    std::vector<bool> seen(static_cast<std::size_t>(model.num_vars), false);
    for (long j = 0; j < k; ++j) {
        int i = static_cast<int>(tok.next_int("max variable index"));
        if (i < 0 || i >= model.num_vars) throw ParseError("query: variable index out of range");
        if (seen[static_cast<std::size_t>(i)]) throw ParseError("query: duplicate variable index");
        seen[static_cast<std::size_t>(i)] = true;
        q.tau[static_cast<std::size_t>(i)] = 0.0;
    }
    return q;
}

// Seeded random split: round(frac * n) max nodes.
inline InferenceQuery random_mmap_query(int num_vars, double max_frac, unsigned seed) {
    InferenceQuery q = all_sum_query(num_vars);
    std::vector<int> idx(static_cast<std::size_t>(num_vars));
    for (int i = 0; i < num_vars; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::mt19937 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    int k = static_cast<int>(std::lround(max_frac * num_vars));
    for (int j = 0; j < k; ++j) q.tau[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])] = 0.0;
    return q;
}

namespace detail {

inline std::string render_score(const std::optional<double>& s) {
    if (!s) return "unevaluated";
    if (*s == kNegInf) return "-inf";
    std::ostringstream o;
    o.precision(17);
    o << *s;
    return o.str();
}

inline std::string render_config(const std::vector<int>& config) {
    std::string out;
    for (std::size_t j = 0; j < config.size(); ++j) {
        if (j) out += "-";
        out += std::to_string(config[j]);
    }
    return out;
}

} // namespace detail

inline std::string write_trace_csv(const std::vector<TraceRecord>& records) {
    std::ostringstream out;
    out.precision(17);
    out << "iter,bound,score,elapsed_s,config\n";
    for (const TraceRecord& r : records)
        out << r.iteration << "," << r.bound << "," << detail::render_score(r.score) << "," << r.elapsed_s
            << "," << detail::render_config(r.config) << "\n";
    return out.str();
}

inline nlohmann::json trace_record_json(const TraceRecord& r) {
    nlohmann::json j;
    j["iter"] = r.iteration;
    j["bound"] = r.bound;
    if (!r.score)
        j["score"] = "unevaluated";
    else if (*r.score == kNegInf)
        j["score"] = "-inf";
    else
        j["score"] = *r.score;
    j["elapsed_s"] = r.elapsed_s;
    j["config"] = r.config;
    j["line_search_failed"] = r.line_search_failed;
    return j;
}

inline std::string write_trace_json(const std::vector<TraceRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const TraceRecord& r : records) arr.push_back(trace_record_json(r));
    return arr.dump(2);
}

inline std::vector<TraceRecord> read_trace_json(const std::string& text) {
    nlohmann::json arr = nlohmann::json::parse(text);
    std::vector<TraceRecord> out;
    for (const auto& j : arr) {
        TraceRecord r;
        r.iteration = j.at("iter").get<int>();
        r.bound = j.at("bound").get<double>();
        const auto& s = j.at("score");
        if (s.is_string()) {
            if (s.get<std::string>() == "-inf") r.score = kNegInf;
        } else {
            r.score = s.get<double>();
        }
        r.elapsed_s = j.at("elapsed_s").get<double>();
        r.config = j.at("config").get<std::vector<int>>();
        r.line_search_failed = j.value("line_search_failed", false);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string write_trace(const std::vector<TraceRecord>& records, const std::string& format) {
    if (format == "csv") return write_trace_csv(records);
    if (format == "json") return write_trace_json(records);
    throw std::invalid_argument("write_trace: unknown format '" + format + "'");
}

} // namespace gdd

#endif
