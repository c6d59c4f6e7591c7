#pragma once

// Model fitting front end: formula text and data in, FittedModel out.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lfgam/fit.hpp"

namespace lfgam {

struct TermInfo {
    std::string label;
    TermClass cls = TermClass::Intercept;
    Eigen::Index offset = 0;
    Eigen::Index cols = 0;
    double edf = 0;
    int null_space_dim = 0;
    std::vector<int> slots;
};

struct FittedModel {
    std::string formula;
    std::string response;
    std::optional<std::string> offset_var;
    Family family;
    bool kappa_estimated = false;
    double gamma = 1.0;
    Schema schema;

    std::vector<TermRecipe> recipes;  // parallel to `terms`
    std::vector<TermInfo> terms;
    std::vector<EmbeddedPenalty> penalties;

    Vector beta;
    Vector log_lambda;
    double phi = 1.0;
    Matrix H;
    Matrix Vb;
    Vector edf_coef;  // diagonal of H^{-1} X'WX
    double edf = 0;
    double deviance = 0;
    double aic = 0;
    double gcv = 0;

    // training quantities
    Matrix X;
    Vector y;
    Vector prior_w;
    Vector offset;
    Vector eta;
    Vector mu;
    Vector w;
    Vector z;

    int iterations = 0;
    bool converged = false;
    bool ridge_used = false;
    std::vector<TracePoint> lambda_trace;
    std::vector<std::pair<double, double>> kappa_trace;
    std::vector<std::string> warnings;
    Eigen::Index dropped_rows = 0;
    Eigen::Index n_obs = 0;  // training rows used by the fit

    [[nodiscard]] Eigen::Index n_coef() const noexcept { return beta.size(); }

    [[nodiscard]] Matrix penalty_sum() const {
        Matrix S = Matrix::Zero(beta.size(), beta.size());
        for (const auto& e : penalties)
            S.block(e.offset, e.offset, e.S.rows(), e.S.cols()) += std::exp(log_lambda(e.slot)) * e.S;
        return S;
    }

    [[nodiscard]] const TermInfo* find_term(const std::string& label) const {
        for (const auto& t : terms)
            if (t.label == label) return &t;
        return nullptr;
    }

    [[nodiscard]] std::size_t term_index(const std::string& label) const {
        for (std::size_t i = 0; i < terms.size(); ++i)
            if (terms[i].label == label) return i;
        std::string known;
        for (const auto& t : terms) known += (known.empty() ? "" : ", ") + t.label;
        throw Error(ErrorKind::Resolution, "unknown term '" + label + "' (model terms: " + known + ")");
    }
};

struct FitOptions {
    FamilyKind family = FamilyKind::Gaussian;
    std::optional<double> kappa;            // negative binomial: fixed instead of estimated
    double gamma = 1.0;
    std::optional<Vector> log_lambda;       // fixed smoothing parameters (natural log)
    PirlsControl pirls;
    LambdaSearchControl lambda_search;
    KappaSearchControl kappa_search;
};

/// Relative residual of the penalized normal equations at the stored fit:
/// |X'W(z - X beta) - S beta|_inf / (1 + |X'Wz|_inf).
inline double score_residual(const FittedModel& m) {
    const Vector Wz = m.w.cwiseProduct(m.z);
    const Vector g = m.X.transpose() * (Wz - m.w.cwiseProduct(m.X * m.beta)) - m.penalty_sum() * m.beta;
    return g.cwiseAbs().maxCoeff() / (1.0 + (m.X.transpose() * Wz).cwiseAbs().maxCoeff());
}

namespace detail {

inline void finalize(FittedModel& m, const PenalizedProblem& prob, const ModelMatrix& mm) {
    const PirlsResult r = prob.fit_at(m.log_lambda);
    if (!r.converged) throw Error(ErrorKind::Fit, "final PIRLS fit did not converge: " + r.message);
    m.beta = r.beta;
    m.eta = r.eta;
    m.mu = r.mu;
    m.w = r.w;
    m.z = r.z;
    m.H = r.H;
    m.deviance = r.deviance;
    m.iterations = r.iterations;
    m.converged = r.converged;
    m.ridge_used = r.ridge_used;
    if (r.ridge_used) m.warnings.push_back("ridge added to an indefinite penalized Hessian");
    m.X = mm.X;
    m.penalties = mm.penalties;

    const Matrix Hinv = r.factor.inverse();
    m.edf_coef = (Hinv * r.XtWX).diagonal();
    m.edf = m.edf_coef.sum();
    for (auto& t : m.terms) t.edf = m.edf_coef.segment(t.offset, t.cols).sum();
    m.phi = estimate_scale(m.family, m.y, m.mu, m.prior_w, m.edf);
    m.Vb = m.phi * Hinv;
    m.Vb = 0.5 * (m.Vb + m.Vb.transpose()).eval();
    m.aic = model_aic(m.family, m.y, m.mu, m.prior_w, m.edf, m.kappa_estimated);
    m.n_obs = m.y.size();
    m.gcv = gcv_value(static_cast<double>(m.n_obs), m.deviance, m.edf, m.gamma);
}

} // namespace detail

/// Fits already-built design blocks. `y`, `offset` are the training response
/// and offset (empty offset means zero).
inline FittedModel fit_blocks(const std::vector<DesignBlock>& blocks, const Vector& y, Vector offset,
                              const FitOptions& opts = {}) {
    FittedModel m;
    m.gamma = opts.gamma;
    const ModelMatrix mm = assemble_model(blocks, std::move(offset));
    if (y.size() != mm.X.rows()) throw Error(ErrorKind::Dimension, "response length does not match the design");

    for (std::size_t b = 0; b < blocks.size(); ++b) {
        TermInfo t;
        t.label = blocks[b].label;
        t.cls = blocks[b].recipe.spec.cls;
        t.offset = mm.ranges[b].offset;
        t.cols = mm.ranges[b].cols;
        t.null_space_dim = blocks[b].penalties.empty() ? static_cast<int>(t.cols) : blocks[b].null_space_dim;
        for (const auto& e : mm.penalties)
            if (e.block == b) t.slots.push_back(e.slot);
        m.terms.push_back(t);
        m.recipes.push_back(blocks[b].recipe);
        for (const auto& w : blocks[b].warnings) m.warnings.push_back(w);
    }

    {
        std::vector<Matrix> full;
        for (const auto& e : mm.penalties) {
            Matrix S = Matrix::Zero(mm.X.cols(), mm.X.cols());
            S.block(e.offset, e.offset, e.S.rows(), e.S.cols()) = e.S;
            full.push_back(std::move(S));
        }
        try {
            check_identifiable(mm.X, full, "set");
        } catch (const Error&) {
            throw Error(ErrorKind::Identifiability,
                        "model is not identifiable: the columns of its terms are linearly dependent in the "
                        "unpenalized space (for example an uncentered smooth together with an intercept)");
        }
    }

    m.y = y;
    m.prior_w = Vector::Ones(y.size());
    m.offset = mm.offset;
    const Family probe_family = opts.family == FamilyKind::NegBin ? Family::negbin(opts.kappa.value_or(1.0))
                                : opts.family == FamilyKind::Poisson ? Family::poisson()
                                                                     : Family::gaussian();
    probe_family.validate_response(y);

    PenalizedProblem prob;
    prob.model = &mm;
    prob.family = probe_family;
    prob.y = y;
    prob.weights = m.prior_w;
    prob.gamma = opts.gamma;
    prob.control = opts.pirls;

    if (opts.log_lambda && opts.log_lambda->size() != mm.n_slots())
        throw Error(ErrorKind::Validation, "expected " + std::to_string(mm.n_slots()) + " smoothing parameters, got " +
                                               std::to_string(opts.log_lambda->size()));

    if (opts.family == FamilyKind::NegBin && !opts.kappa) {
        const KappaSearch ks = estimate_nb_kappa(prob, opts.kappa_search, opts.lambda_search);
        prob.family = Family::negbin(ks.kappa);
        m.kappa_estimated = true;
        m.kappa_trace = ks.trace;
        if (ks.boundary)
            m.warnings.push_back("negative binomial kappa estimate " + std::to_string(ks.kappa) +
                                 " is at the boundary of the search interval");
    }
    m.family = prob.family;

    if (opts.log_lambda) {
        m.log_lambda = *opts.log_lambda;
    } else if (mm.n_slots() > 0) {
        const LambdaSearch ls = optimize_lambda(prob, opts.lambda_search);
        m.log_lambda = ls.log_lambda;
        m.lambda_trace = ls.trace;
        if (!ls.converged) m.warnings.push_back("smoothing parameter search reached its evaluation limit");
    } else {
        m.log_lambda = Vector(0);
    }
    detail::finalize(m, prob, mm);
    return m;
}

namespace detail {

inline std::set<std::string> scalar_columns_used(const ResolvedFormula& rf, const Schema& schema) {
    std::set<std::string> used{rf.response};
    if (rf.offset) used.insert(*rf.offset);
    for (const auto& t : rf.terms) {
        for (const auto& v : t.vars)
            if (schema.at(v).is_scalar_like()) used.insert(v);
        if (!t.by_var.empty() && schema.at(t.by_var).is_scalar_like()) used.insert(t.by_var);
    }
    return used;
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        rethrow_with_stage(stage, e);
    }
    throw Error(ErrorKind::Fit, "unreachable");
}

} // namespace detail

inline FittedModel fit(const Dataset& data, const std::string& formula, const FitOptions& opts = {}) {
    const Schema schema = data.schema();
    const FormulaAST ast = detail::staged("parse", [&] { return parse_formula(formula); });
    const ResolvedFormula rf = detail::staged("resolve", [&] { return resolve(ast, schema); });

    // drop rows with a missing value in any scalar column the model uses
    std::vector<Eigen::Index> keep;
    const auto used = detail::scalar_columns_used(rf, schema);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        bool ok = true;
        for (const auto& name : used)
            if (std::isnan(data.column(name).values(i))) ok = false;
        if (ok) keep.push_back(i);
    }
    const Eigen::Index dropped = data.rows() - static_cast<Eigen::Index>(keep.size());
    const Dataset train = dropped > 0 ? data.subset(keep) : data;
    if (train.rows() == 0) throw Error(ErrorKind::Validation, "[ingest] no complete rows remain after dropping missing values");

    std::vector<DesignBlock> blocks = detail::staged("build", [&] {
        std::vector<DesignBlock> out;
        if (rf.intercept) {
            TermSpec s;
            s.kind = TermKind::Intercept;
            s.cls = TermClass::Intercept;
            s.center = false;
            out.push_back(build_term(s, train));
        }
        for (const auto& t : rf.terms) out.push_back(build_term(t, train));
        return out;
    });
    const Vector y = detail::staged("build", [&] { return detail::scalar_values(train, rf.response); });
    const Vector off = rf.offset ? detail::staged("build", [&] { return detail::scalar_values(train, *rf.offset); })
                                 : Vector::Zero(train.rows());

    FittedModel m = detail::staged("fit", [&] { return fit_blocks(blocks, y, off, opts); });
    m.formula = formula;
    m.response = rf.response;
    m.offset_var = rf.offset;
    m.schema = schema;
    m.dropped_rows = dropped;
    if (dropped > 0)
        m.warnings.insert(m.warnings.begin(), "dropped " + std::to_string(dropped) + " rows with missing values");
    return m;
}

} // namespace lfgam
