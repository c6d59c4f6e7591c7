#pragma once

// Command-line front end. Exit codes: 0 success, 2 fit failure, 3 input error.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lfgam/io.hpp"

namespace lfgam::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFit = 2;
inline constexpr int kExitInput = 3;

inline int exit_code(ErrorKind k) {
    return k == ErrorKind::Fit || k == ErrorKind::Identifiability ? kExitFit : kExitInput;
}

namespace detail {

inline void emit(const std::string& path, const std::string& content) {
    if (path == "-")
        std::cout << content;
    else
        write_file(path, content);
}

inline std::string fit_summary(const FittedModel& m) {
    std::ostringstream os;
    os << "formula: " << m.formula << "\n"
       << "family: " << m.family.name() << " (" << m.family.link_name() << " link)";
    if (m.family.kind == FamilyKind::NegBin) os << ", kappa " << format_double(m.family.kappa);
    os << "\nn: " << m.n_obs << ", coefficients: " << m.n_coef() << ", edf: " << format_double(m.edf)
       << "\ndeviance: " << format_double(m.deviance) << ", scale: " << format_double(m.phi)
       << ", aic: " << format_double(m.aic) << ", gcv: " << format_double(m.gcv) << "\n";
    for (const auto& t : m.terms) os << "  " << t.label << "  edf " << format_double(t.edf) << "\n";
    return os.str();
}

inline Dataset load_matching_data(const FittedModel& m, const std::string& data, const std::string& schema) {
    Dataset d = ingest(data, schema);
    require_schema(m, d.schema());
    return d;
}

} // namespace detail

struct FitArgs {
    std::string data, schema, formula, family = "gaussian", out;
    std::uint64_t seed = 1;
    double gamma = 1.0;
    std::optional<double> kappa;
};

inline int cmd_fit(const FitArgs& a) {
    const Dataset d = ingest(a.data, a.schema);
    FitOptions o;
    o.family = family_from_string(a.family);
    o.gamma = a.gamma;
    if (a.kappa) {
        if (o.family != FamilyKind::NegBin) throw Error(ErrorKind::Input, "--kappa applies to the negbin family only");
        o.kappa = *a.kappa;
    }
    if (!(a.gamma > 0)) throw Error(ErrorKind::Input, "--gamma must be positive");
    const FittedModel m = fit(d, a.formula, o);
    json j = model_to_json(m);
    j["seed"] = a.seed;
    detail::emit(a.out, j.dump(1) + "\n");
    for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
    if (a.out != "-") std::cout << detail::fit_summary(m);
    return kExitOk;
}

struct PredictArgs {
    std::string model, data, schema, out = "-", scale = "link";
};

inline int cmd_predict(const PredictArgs& a) {
    const FittedModel m = load_model(a.model);
    const Dataset d = detail::load_matching_data(m, a.data, a.schema);
    const PredictScale scale = predict_scale_from_string(a.scale);
    const Prediction p = predict(m, d, scale);
    CsvTable t{{"row", "term", "estimate", "se", "scale"}};
    if (scale == PredictScale::Terms) {
        for (Eigen::Index i = 0; i < p.term_fit.rows(); ++i)
            for (Eigen::Index j = 0; j < p.term_fit.cols(); ++j)
                t.push_back({std::to_string(i), p.term_labels[static_cast<std::size_t>(j)],
                             format_double(p.term_fit(i, j)), format_double(p.term_se(i, j)), "terms"});
    } else {
        for (Eigen::Index i = 0; i < p.fit.size(); ++i)
            t.push_back({std::to_string(i), "", format_double(p.fit(i)), format_double(p.se(i)), to_string(scale)});
    }
    detail::emit(a.out, write_csv(t));
    return kExitOk;
}

struct TermsArgs {
    std::string model, data, schema, out = "-";
    std::vector<std::string> terms;
    std::vector<long> rows;
    int grid = 100;
    int draws = 1000;
    std::uint64_t seed = 1;
};

inline int cmd_terms(const TermsArgs& a) {
    const FittedModel m = load_model(a.model);
    std::optional<Dataset> d;
    if (!a.data.empty()) d = detail::load_matching_data(m, a.data, a.schema);
    std::vector<std::string> labels = a.terms;
    if (labels.empty())
        for (const auto& t : m.terms)
            if (t.cls != TermClass::Intercept && t.cls != TermClass::Linear && t.cls != TermClass::LinearFactor)
                labels.push_back(t.label);
    EffectOptions o;
    o.grid_points = a.grid;
    o.draws = a.draws;
    o.seed = a.seed;
    for (long r : a.rows) o.rows.push_back(r);
    CsvTable t{{"term", "panel", "row", "index", "index2", "estimate", "se"}};
    for (const auto& l : labels) {
        const TermEffect e = term_effect(m, l, d ? &*d : nullptr, o);
        for (const auto& r : e.rows)
            t.push_back({e.label, r.panel, r.row < 0 ? "" : std::to_string(r.row), format_double(r.index),
                         format_double(r.index2), format_double(r.estimate), format_double(r.se)});
    }
    detail::emit(a.out, write_csv(t));
    return kExitOk;
}

struct SampleArgs {
    std::string model, out = "-";
    int n = 1000;
    std::uint64_t seed = 1;
};

inline int cmd_sample(const SampleArgs& a) {
    const FittedModel m = load_model(a.model);
    const Matrix draws = posterior_sample(m, a.n, a.seed);
    std::string out = "draw,coef,value\n";
    for (Eigen::Index d = 0; d < draws.rows(); ++d)
        for (Eigen::Index j = 0; j < draws.cols(); ++j)
            out += std::to_string(d) + "," + std::to_string(j) + "," + format_double(draws(d, j)) + "\n";
    detail::emit(a.out, out);
    return kExitOk;
}

struct SimulateArgs {
    std::string kind, out;
    int n = 500;
    int T = 30;
    std::uint64_t seed = 1;
    double sigma = -1;
};

inline int cmd_simulate(const SimulateArgs& a) {
    SimulationOptions o;
    o.kind = sim_kind_from_string(a.kind);
    o.n = a.n;
    o.T = a.T;
    o.seed = a.seed;
    o.sigma = a.sigma;
    const Simulation s = simulate(o);
    write_file(a.out + ".csv", dataset_to_csv(s.data));
    write_file(a.out + ".schema.json", schema_to_json(s.data.schema()).dump(1) + "\n");
    write_file(a.out + ".truth.json", s.truth.dump(1) + "\n");
    std::cout << "wrote " << a.out << ".csv, " << a.out << ".schema.json, " << a.out << ".truth.json\n"
              << "formula: " << s.formula << "\n";
    return kExitOk;
}

inline int main(int argc, char** argv) {
    CLI::App app{"lfgam: penalized-spline additive models with functional terms"};
    app.require_subcommand(1);

    FitArgs fa;
    auto* fit_cmd = app.add_subcommand("fit", "fit a model and write the model file");
    fit_cmd->add_option("--data", fa.data, "CSV data file")->required();
    fit_cmd->add_option("--schema", fa.schema, "JSON schema file")->required();
    fit_cmd->add_option("--formula", fa.formula, "model formula")->required();
    fit_cmd->add_option("--family", fa.family, "gaussian, poisson or negbin")->capture_default_str();
    fit_cmd->add_option("--out", fa.out, "model file ('-' for stdout)")->required();
    fit_cmd->add_option("--seed", fa.seed, "seed recorded with the model")->capture_default_str();
    fit_cmd->add_option("--gamma", fa.gamma, "GCV degrees-of-freedom multiplier")->capture_default_str();
    fit_cmd->add_option("--kappa", fa.kappa, "fixed negative binomial kappa");

    PredictArgs pa;
    auto* pred_cmd = app.add_subcommand("predict", "predict from a model file");
    pred_cmd->add_option("--model", pa.model)->required();
    pred_cmd->add_option("--data", pa.data)->required();
    pred_cmd->add_option("--schema", pa.schema)->required();
    pred_cmd->add_option("--out", pa.out)->capture_default_str();
    pred_cmd->add_option("--scale", pa.scale, "link, response or terms")->capture_default_str();

    TermsArgs ta;
    auto* terms_cmd = app.add_subcommand("terms", "export term effect tables");
    terms_cmd->add_option("--model", ta.model)->required();
    terms_cmd->add_option("--data", ta.data, "data for the data/product/cumulative panels");
    terms_cmd->add_option("--schema", ta.schema);
    terms_cmd->add_option("--out", ta.out)->capture_default_str();
    terms_cmd->add_option("--term", ta.terms, "term label (repeatable); default all smooth terms");
    terms_cmd->add_option("--rows", ta.rows, "observation rows for the data panels");
    terms_cmd->add_option("--grid", ta.grid, "grid points per dimension")->capture_default_str();
    terms_cmd->add_option("--draws", ta.draws, "posterior draws for sampled bands")->capture_default_str();
    terms_cmd->add_option("--seed", ta.seed)->capture_default_str();

    SampleArgs sa;
    auto* sample_cmd = app.add_subcommand("sample", "draw coefficients from the posterior");
    sample_cmd->add_option("--model", sa.model)->required();
    sample_cmd->add_option("--n", sa.n, "number of draws")->capture_default_str();
    sample_cmd->add_option("--seed", sa.seed)->capture_default_str();
    sample_cmd->add_option("--out", sa.out)->capture_default_str();

    SimulateArgs ma;
    auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset with its truth file");
    sim_cmd->add_option("--kind", ma.kind, "vcm, sofr or dlm")->required();
    sim_cmd->add_option("--n", ma.n)->capture_default_str();
    sim_cmd->add_option("--T", ma.T)->capture_default_str();
    sim_cmd->add_option("--seed", ma.seed)->capture_default_str();
    sim_cmd->add_option("--sigma", ma.sigma, "noise sd (default per kind)");
    sim_cmd->add_option("--out", ma.out, "output prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*fit_cmd) return cmd_fit(fa);
        if (*pred_cmd) return cmd_predict(pa);
        if (*terms_cmd) {
            if (!ta.data.empty() && ta.schema.empty())
                throw Error(ErrorKind::Input, "--data needs --schema");
            return cmd_terms(ta);
        }
        if (*sample_cmd) return cmd_sample(sa);
        if (*sim_cmd) return cmd_simulate(ma);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

} // namespace lfgam::cli
