#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lfgam/cli.hpp"

namespace support {

using lfgam::Matrix;
using lfgam::Vector;

inline Vector normal_vector(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    Vector v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline Vector uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Vector v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline Matrix uniform_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index T, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix M(n, T);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index t = 0; t < T; ++t) M(i, t) = d(rng);
    return M;
}

/// Fits with the smoothing parameters held at `log_lambda` for every slot.
inline lfgam::FittedModel fit_fixed(const lfgam::Dataset& d, const std::string& formula, double log_lambda,
                                    lfgam::FamilyKind fam = lfgam::FamilyKind::Gaussian) {
    const auto ast = lfgam::parse_formula(formula);
    const auto rf = lfgam::resolve(ast, d.schema());
    int slots = 0;
    for (const auto& t : rf.terms) {
        if (t.cls == lfgam::TermClass::Linear || t.cls == lfgam::TermClass::LinearFactor) continue;
        slots += t.margins.size() > 1 ? static_cast<int>(t.margins.size()) : 1;
    }
    lfgam::FitOptions o;
    o.family = fam;
    o.log_lambda = Vector::Constant(slots, log_lambda);
    return lfgam::fit(d, formula, o);
}

/// Kind of the engine error thrown by `f`, or nullopt when it returns.
template <class F>
std::optional<lfgam::ErrorKind> error_kind(F&& f) {
    try {
        f();
    } catch (const lfgam::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

/// Message of the engine error thrown by `f`, or "" when it returns.
template <class F>
std::string error_message(F&& f) {
    try {
        f();
    } catch (const lfgam::Error& e) {
        return e.what();
    }
    return "";
}

inline double correlation(const Vector& a, const Vector& b) {
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

// ------------------------------------------------------------ formula corpus

inline std::string random_ident(std::mt19937_64& rng) {
    static const std::string first = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    static const std::string rest = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.";
    std::uniform_int_distribution<int> len(1, 8);
    std::uniform_int_distribution<std::size_t> f(0, first.size() - 1), r(0, rest.size() - 1);
    for (;;) {
        std::string s(1, first[f(rng)]);
        const int n = len(rng);
        for (int i = 1; i < n; ++i) s += rest[r(rng)];
        if (s != "s" && s != "te" && s != "offset" && s != "k" && s != "bs" && s != "by" && s != "center") return s;
    }
}

/// A random well-formed formula AST.
inline lfgam::FormulaAST random_formula(std::mt19937_64& rng) {
    using lfgam::TermFunc;
    std::uniform_int_distribution<int> nterms(1, 6), pick(0, 9), nargs(1, 3), coin(0, 1), kval(3, 20);
    lfgam::FormulaAST ast;
    ast.response = random_ident(rng);
    bool offset = false;
    const int n = nterms(rng);
    static const char* bases[] = {"cr", "cc", "re"};
    for (int i = 0; i < n; ++i) {
        lfgam::TermNode t;
        const int c = pick(rng);
        if (c == 0) {
            t.func = coin(rng) ? TermFunc::Intercept : TermFunc::NoIntercept;
        } else if (c == 1 && !offset) {
            t.func = TermFunc::Offset;
            t.args = {random_ident(rng)};
            offset = true;
        } else if (c <= 3) {
            t.func = TermFunc::Linear;
            t.args = {random_ident(rng)};
        } else {
            t.func = c <= 7 ? TermFunc::Smooth : TermFunc::Tensor;
            const int a = nargs(rng);
            for (int j = 0; j < a; ++j) t.args.push_back(random_ident(rng));
            if (coin(rng)) {
                const int m = coin(rng) ? 1 : a;
                for (int j = 0; j < m; ++j) t.k.push_back(kval(rng));
            }
            if (coin(rng)) {
                const int m = coin(rng) ? 1 : a;
                for (int j = 0; j < m; ++j) t.bs.push_back(bases[pick(rng) % 3]);
            }
            if (coin(rng)) t.by = random_ident(rng);
            if (coin(rng)) t.center = coin(rng) == 1;
        }
        ast.terms.push_back(std::move(t));
    }
    return ast;
}

/// Inserts random whitespace after every comma, parenthesis and operator.
inline std::string scatter_whitespace(const std::string& s, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, 3);
    static const char* ws[] = {"", " ", "\t", "  \n"};
    std::string out;
    for (char c : s) {
        if (c == ' ') {
            out += ws[d(rng)];
            continue;
        }
        out += c;
        if (c == ',' || c == '(' || c == '~' || c == '+' || c == '=') out += ws[d(rng)];
    }
    return out;
}

// ------------------------------------------------------------ CLI runner

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

/// Runs the command-line front end in-process with captured output.
inline CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lfgam");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    CliResult r;
    r.code = lfgam::cli::main(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lfgam_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace support
