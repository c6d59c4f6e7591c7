#pragma once

// Posterior summaries of a fitted model: effective degrees of freedom,
// coefficient covariance and draws, predictions and plot-ready term effects.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgam/model.hpp"

namespace lfgam {

struct EdfReport {
    std::vector<std::pair<std::string, double>> per_term;
    double total = 0;
};

inline EdfReport edf(const FittedModel& m) {
    EdfReport r;
    for (const auto& t : m.terms) r.per_term.emplace_back(t.label, t.edf);
    r.total = m.edf;
    return r;
}

/// phi * H^{-1}; throws when it is not positive definite.
inline const Matrix& coef_covariance(const FittedModel& m) {
    Eigen::LLT<Matrix> llt(m.Vb);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::Fit, std::string("coefficient covariance is not positive definite") +
                                        (m.ridge_used ? " (a ridge was added to the penalized Hessian)" : ""));
    return m.Vb;
}

namespace detail {

/// L with L L' = V, by Cholesky or, failing that, a clipped eigen root.
inline Matrix covariance_root(const Matrix& V) {
    Eigen::LLT<Matrix> llt(V);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(V);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline Matrix gaussian_draws(const Vector& mean, const Matrix& V, int n, std::uint64_t seed) {
    const Matrix L = covariance_root(V);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index p = mean.size();
    Matrix out(n, p);
    Vector z(p);
    for (int d = 0; d < n; ++d) {
        for (Eigen::Index j = 0; j < p; ++j) z(j) = normal(rng);
        out.row(d) = (mean + L * z).transpose();
    }
    return out;
}

inline Vector row_se(const Matrix& R, const Matrix& V) {
    return (R * V).cwiseProduct(R).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
}

inline Vector grid(double lo, double hi, int n) {
    if (n == 1) return Vector::Constant(1, 0.5 * (lo + hi));
    return Vector::LinSpaced(n, lo, hi);
}

} // namespace detail

/// n draws from Normal(beta, V_beta); one draw per row.
inline Matrix posterior_sample(const FittedModel& m, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw Error(ErrorKind::Validation, "number of posterior draws must be positive");
    return detail::gaussian_draws(m.beta, m.Vb, n_samples, seed);
}

namespace detail {

inline void note_range(const std::string& col, double v, const KnotVector& kv, std::set<std::string>& bad) {
    if (v < kv.lower() || v > kv.upper()) bad.insert(col);
}

/// Throws an extrapolation error naming every column with values outside
/// the training knot range of a non-periodic spline margin.
inline void check_prediction_ranges(const FittedModel& m, const Dataset& data) {
    std::set<std::string> bad;
    for (const auto& r : m.recipes) {
        for (std::size_t j = 0; j < r.spec.margins.size(); ++j) {
            if (r.spec.margins[j].kind != BasisKind::CubicBSpline) continue;
            const auto& name = r.spec.vars[j];
            const auto& col = data.column(name);
            if (r.spec.summed) {
                if (col.meta.role != ColumnRole::Matrix) continue;
                for (double v : col.matrix.reshaped()) note_range(name, v, r.knots[j], bad);
            } else {
                if (!col.meta.is_scalar_like()) continue;
                for (double v : col.values)
                    if (!std::isnan(v)) note_range(name, v, r.knots[j], bad);
            }
        }
    }
    if (!bad.empty()) {
        std::string list;
        for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
        throw Error(ErrorKind::Extrapolation, "values outside the training range in column(s): " + list);
    }
}

} // namespace detail

/// Design matrix of `data` under the fitted term recipes.
inline Matrix model_design(const FittedModel& m, const Dataset& data) {
    detail::check_prediction_ranges(m, data);
    Matrix X(data.rows(), m.n_coef());
    for (std::size_t i = 0; i < m.recipes.size(); ++i) {
        const Matrix B = term_design(m.recipes[i], data);
        if (B.cols() != m.terms[i].cols)
            throw Error(ErrorKind::Dimension, "term " + m.terms[i].label + " rebuilt with " +
                                                  std::to_string(B.cols()) + " columns, fitted with " +
                                                  std::to_string(m.terms[i].cols));
        X.middleCols(m.terms[i].offset, m.terms[i].cols) = B;
    }
    return X;
}

enum class PredictScale { Link, Response, Terms };

inline const char* to_string(PredictScale s) {
    switch (s) {
    case PredictScale::Link: return "link";
    case PredictScale::Response: return "response";
    case PredictScale::Terms: return "terms";
    }
    return "?";
}

inline PredictScale predict_scale_from_string(const std::string& s) {
    if (s == "link") return PredictScale::Link;
    if (s == "response") return PredictScale::Response;
    if (s == "terms") return PredictScale::Terms;
    throw Error(ErrorKind::Input, "unknown prediction scale '" + s + "' (expected link, response or terms)");
}

struct Prediction {
    PredictScale scale = PredictScale::Link;
    Vector fit;  // link or response scale; for terms, the link-scale total
    Vector se;
    Vector offset;
    std::vector<std::string> term_labels;  // terms scale only
    Matrix term_fit;                       // n x terms
    Matrix term_se;
};

inline Prediction predict(const FittedModel& m, const Dataset& data, PredictScale scale = PredictScale::Link) {
    Prediction p;
    p.scale = scale;
    const Matrix X = model_design(m, data);
    p.offset = m.offset_var ? detail::scalar_values(data, *m.offset_var) : Vector::Zero(data.rows());
    const Vector eta = X * m.beta + p.offset;
    const Vector se = detail::row_se(X, m.Vb);
    switch (scale) {
    case PredictScale::Link:
        p.fit = eta;
        p.se = se;
        break;
    case PredictScale::Response:
        p.fit.resize(eta.size());
        p.se.resize(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            p.fit(i) = m.family.linkinv(eta(i));
            p.se(i) = std::abs(m.family.mu_eta(eta(i))) * se(i);
        }
        break;
    case PredictScale::Terms:
        p.fit = eta;
        p.se = se;
        p.term_fit.resize(data.rows(), static_cast<Eigen::Index>(m.terms.size()));
        p.term_se.resize(data.rows(), static_cast<Eigen::Index>(m.terms.size()));
        for (std::size_t j = 0; j < m.terms.size(); ++j) {
            const auto& t = m.terms[j];
            const auto B = X.middleCols(t.offset, t.cols);
            p.term_labels.push_back(t.label);
            p.term_fit.col(static_cast<Eigen::Index>(j)) = B * m.beta.segment(t.offset, t.cols);
            p.term_se.col(static_cast<Eigen::Index>(j)) =
                detail::row_se(B, m.Vb.block(t.offset, t.offset, t.cols, t.cols));
        }
        break;
    }
    return p;
}

/// One row of a plot-ready effect table. `row` is the observation (or, for
/// factor-by and random-effect smooth panels, the level code); `index2` is
/// used by two-dimensional panels.
struct EffectRow {
    std::string panel;
    Eigen::Index row = -1;
    double index = std::numeric_limits<double>::quiet_NaN();
    double index2 = std::numeric_limits<double>::quiet_NaN();
    double estimate = 0;
    double se = 0;
};

struct TermEffect {
    std::string label;
    TermClass cls = TermClass::Intercept;
    std::vector<EffectRow> rows;
};

struct EffectOptions {
    int grid_points = 100;       // per scalar dimension
    int dlm_x_points = 60;       // per lag in the distributed-lag surface
    int draws = 1000;            // posterior draws for sampled bands
    std::uint64_t seed = 1;
    std::vector<Eigen::Index> rows;  // observations for the data panels; empty means all
};

/// Partial sums over matrix columns of a summed term, for a set of rows.
struct CumulativeEffect {
    std::vector<Eigen::Index> rows;
    Matrix index;       // rows x T index value of each cell
    Matrix data;        // covariate (or by-variable) value of each cell
    Matrix product;     // per-column contribution
    Matrix product_se;
    Matrix cumulative;  // running sums of `product`
    Matrix cumulative_se;
};

namespace detail {

inline bool is_summed_class(TermClass c) {
    return c == TermClass::Sofr || c == TermClass::Dlm || c == TermClass::SummedSmooth;
}

/// Rows `rows` of a summed term's design restricted to matrix column t.
inline Matrix summed_cell_design(const TermRecipe& r, const Dataset& data, const std::vector<Eigen::Index>& rows,
                                 Eigen::Index t) {
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    std::vector<Vector> cells;
    for (const auto& v : r.spec.vars) {
        const Matrix& M = matrix_values(data, v);
        Vector c(n);
        for (Eigen::Index i = 0; i < n; ++i) c(i) = M(rows[i], t);
        cells.push_back(std::move(c));
    }
    const Matrix& first = matrix_values(data, r.spec.vars.front());
    const Vector w = column_weights(r, first.cols());
    Vector scale = Vector::Constant(n, w(t));
    if (r.spec.by == ByKind::Matrix) {
        const Matrix& by = matrix_values(data, r.spec.by_var);
        for (Eigen::Index i = 0; i < n; ++i) scale(i) *= by(rows[i], t);
    }
    return scale.asDiagonal() * (raw_tensor_design(r, cells) * r.constraint.Z);
}

inline std::vector<Eigen::Index> resolve_rows(const std::vector<Eigen::Index>& rows, Eigen::Index n) {
    std::vector<Eigen::Index> out = rows;
    if (out.empty())
        for (Eigen::Index i = 0; i < n; ++i) out.push_back(i);
    for (auto i : out)
        if (i < 0 || i >= n)
            throw Error(ErrorKind::Validation, "row " + std::to_string(i) + " is outside the data (" +
                                                   std::to_string(n) + " rows)");
    return out;
}

} // namespace detail

inline CumulativeEffect cumulative_effect(const FittedModel& m, const std::string& label, const Dataset& data,
                                          const std::vector<Eigen::Index>& rows = {}, int draws = 1000,
                                          std::uint64_t seed = 1) {
    const std::size_t ti = m.term_index(label);
    const auto& r = m.recipes[ti];
    const auto& t = m.terms[ti];
    if (!detail::is_summed_class(t.cls))
        throw Error(ErrorKind::Validation, "cumulative effects need a scalar-on-function or distributed-lag term; " +
                                               label + " is " + to_string(t.cls));
    detail::check_prediction_ranges(m, data);
    CumulativeEffect out;
    out.rows = detail::resolve_rows(rows, data.rows());
    const Eigen::Index n = static_cast<Eigen::Index>(out.rows.size());
    const Matrix& first = detail::matrix_values(data, r.spec.vars.front());
    const Eigen::Index T = first.cols();
    const Matrix& data_src =
        r.spec.by == ByKind::Matrix ? detail::matrix_values(data, r.spec.by_var) : first;
    const Matrix& index_src = detail::matrix_values(data, r.spec.vars.back());
    const bool index_is_column = r.spec.cls == TermClass::SummedSmooth;
    const auto& idx_meta = data.column(r.spec.vars.front()).meta.index_values;

    const Vector bb = m.beta.segment(t.offset, t.cols);
    const Matrix Vbb = m.Vb.block(t.offset, t.offset, t.cols, t.cols);
    const Matrix draws_b = detail::gaussian_draws(bb, Vbb, draws, seed);  // draws x pb

    out.index.resize(n, T);
    out.data.resize(n, T);
    out.product.resize(n, T);
    out.product_se.resize(n, T);
    out.cumulative.resize(n, T);
    out.cumulative_se.resize(n, T);
    Matrix running = Matrix::Zero(n, t.cols);
    Vector acc = Vector::Zero(n);
    Matrix acc_draws = Matrix::Zero(n, draws);
    for (Eigen::Index c = 0; c < T; ++c) {
        const Matrix D = detail::summed_cell_design(r, data, out.rows, c);
        const Vector contrib = D * bb;
        acc += contrib;
        acc_draws += D * draws_b.transpose();
        out.product.col(c) = contrib;
        out.product_se.col(c) = detail::row_se(D, Vbb);
        out.cumulative.col(c) = acc;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index row = out.rows[i];
            out.data(i, c) = data_src(row, c);
            out.index(i, c) = index_is_column ? (idx_meta.empty() ? static_cast<double>(c) : idx_meta[c])
                                              : index_src(row, c);
            const double mean = acc_draws.row(i).mean();
            out.cumulative_se(i, c) =
                draws > 1 ? std::sqrt((acc_draws.row(i).array() - mean).square().sum() / (draws - 1)) : 0.0;
        }
    }
    return out;
}

namespace detail {

inline void push_curve(TermEffect& e, const std::string& panel, const Matrix& R, const Vector& bb, const Matrix& Vbb,
                       const Vector& x, const Vector* x2 = nullptr, Eigen::Index row = -1) {
    const Vector est = R * bb;
    const Vector se = row_se(R, Vbb);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        e.rows.push_back({panel, row, x(i), x2 ? (*x2)(i) : std::numeric_limits<double>::quiet_NaN(), est(i), se(i)});
}

inline Vector margin_grid(const TermRecipe& r, std::size_t j, int points) {
    const auto& kv = r.knots[j];
    return grid(kv.lower(), kv.upper(), points);
}

} // namespace detail

/// Plot-ready tables for one term. Panels:
///   smooth     - the estimated function on a grid (the coefficient view for
///                varying coefficients, the probe for scalar-on-function terms)
///   data       - covariate (or multiplier) values of the chosen observations
///   product    - per-observation (and per-column) contributions
///   cumulative - running sums over matrix columns, ending at the term's
///                contribution to the linear predictor
///   surface    - distributed-lag surface over the observed range per lag
///   marginal   - distributed-lag surface summed over the lags
/// Data panels need `data`; pass nullptr for the grid panels alone.
inline TermEffect term_effect(const FittedModel& m, const std::string& label, const Dataset* data = nullptr,
                              const EffectOptions& opts = {}) {
    const std::size_t ti = m.term_index(label);
    const auto& r = m.recipes[ti];
    const auto& t = m.terms[ti];
    TermEffect e{label, t.cls, {}};
    const Vector bb = m.beta.segment(t.offset, t.cols);
    const Matrix Vbb = m.Vb.block(t.offset, t.offset, t.cols, t.cols);
    const int G = opts.grid_points;

    switch (t.cls) {
    case TermClass::Intercept:
    case TermClass::Linear:
    case TermClass::LinearFactor:
        throw Error(ErrorKind::Validation, "term " + label + " is parametric and has no effect curve");
    case TermClass::RandomEffect: {
        const Eigen::Index L = static_cast<Eigen::Index>(r.levels.size());
        const Vector codes = Vector::LinSpaced(L, 0, static_cast<double>(L - 1));
        const Matrix R = smooth_rows(r, {codes});
        const Vector est = R * bb;
        const Vector se = detail::row_se(R, Vbb);
        for (Eigen::Index l = 0; l < L; ++l) e.rows.push_back({"smooth", l, static_cast<double>(l),
                                                               std::numeric_limits<double>::quiet_NaN(), est(l), se(l)});
        return e;
    }
    case TermClass::PlainSmooth:
    case TermClass::PlainTensor:
    case TermClass::VaryingCoefficient:
    case TermClass::FactorBy: {
        std::vector<Vector> values;
        Vector x1, x2;
        if (r.spec.vars.size() == 1) {
            x1 = detail::margin_grid(r, 0, G);
            values.push_back(x1);
        } else if (r.spec.vars.size() == 2) {
            const Vector g1 = detail::margin_grid(r, 0, G);
            const Vector g2 = detail::margin_grid(r, 1, G);
            x1.resize(G * G);
            x2.resize(G * G);
            for (int a = 0; a < G; ++a)
                for (int b = 0; b < G; ++b) {
                    x1(a * G + b) = g1(a);
                    x2(a * G + b) = g2(b);
                }
            values = {x1, x2};
        } else {
            throw Error(ErrorKind::Validation, "effect tables support at most two smooth arguments");
        }
        const int levels = t.cls == TermClass::FactorBy ? static_cast<int>(r.levels.size()) : 1;
        for (int l = 0; l < levels; ++l) {
            const Matrix R = smooth_rows(r, values, l);
            detail::push_curve(e, "smooth", R, bb, Vbb, x1, x2.size() ? &x2 : nullptr,
                               t.cls == TermClass::FactorBy ? l : -1);
        }
        if (t.cls == TermClass::VaryingCoefficient && data && r.spec.vars.size() == 1) {
            const auto rows = detail::resolve_rows(opts.rows, data->rows());
            const Vector z = detail::scalar_values(*data, r.spec.vars.front());
            const Vector x = detail::scalar_values(*data, r.spec.by_var);
            detail::check_prediction_ranges(m, *data);
            Vector zr(static_cast<Eigen::Index>(rows.size()));
            Vector xr(zr.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                zr(static_cast<Eigen::Index>(i)) = z(rows[i]);
                xr(static_cast<Eigen::Index>(i)) = x(rows[i]);
            }
            const Matrix R = smooth_rows(r, {zr});
            const Matrix P = xr.asDiagonal() * R;
            const Vector est = P * bb;
            const Vector se = detail::row_se(P, Vbb);
            for (Eigen::Index i = 0; i < zr.size(); ++i) {
                const Eigen::Index row = rows[static_cast<std::size_t>(i)];
                e.rows.push_back({"data", row, zr(i), std::numeric_limits<double>::quiet_NaN(), xr(i), 0.0});
                e.rows.push_back({"product", row, zr(i), std::numeric_limits<double>::quiet_NaN(), est(i), se(i)});
            }
        }
        return e;
    }
    case TermClass::Sofr:
    case TermClass::SummedSmooth:
    case TermClass::Dlm: break;
    }

    if (t.cls == TermClass::Dlm) {
        std::vector<Vector> values(2);
        Vector xs, ls;
        const int X = opts.dlm_x_points;
        xs.resize(static_cast<Eigen::Index>(r.lag_ranges.size()) * X);
        ls.resize(xs.size());
        for (std::size_t l = 0; l < r.lag_ranges.size(); ++l) {
            const auto& lr = r.lag_ranges[l];
            const Vector g = detail::grid(lr.lower, lr.upper, X);
            xs.segment(static_cast<Eigen::Index>(l) * X, X) = g;
            ls.segment(static_cast<Eigen::Index>(l) * X, X).setConstant(lr.lag);
        }
        detail::push_curve(e, "surface", smooth_rows(r, {xs, ls}), bb, Vbb, xs, &ls);

        // lag-marginal curve with sampled bands
        const Vector gx = detail::margin_grid(r, 0, G);
        Matrix M = Matrix::Zero(G, t.cols);
        for (const auto& lr : r.lag_ranges) M += smooth_rows(r, {gx, Vector::Constant(G, lr.lag)});
        const Matrix dr = detail::gaussian_draws(bb, Vbb, opts.draws, opts.seed);
        const Matrix sampled = M * dr.transpose();
        const Vector est = M * bb;
        for (int i = 0; i < G; ++i) {
            const double mean = sampled.row(i).mean();
            const double sd = opts.draws > 1
                                  ? std::sqrt((sampled.row(i).array() - mean).square().sum() / (opts.draws - 1))
                                  : 0.0;
            e.rows.push_back({"marginal", -1, gx(i), std::numeric_limits<double>::quiet_NaN(), est(i), sd});
        }
    } else {
        const std::size_t j = r.spec.vars.size() - 1;
        const Vector g = detail::margin_grid(r, j, G);
        detail::push_curve(e, "smooth", smooth_rows(r, {g}), bb, Vbb, g);
    }

    if (data) {
        const CumulativeEffect c = cumulative_effect(m, label, *data, opts.rows, opts.draws, opts.seed);
        for (std::size_t i = 0; i < c.rows.size(); ++i) {
            const Eigen::Index ii = static_cast<Eigen::Index>(i);
            const Eigen::Index row = c.rows[i];
            for (Eigen::Index k = 0; k < c.index.cols(); ++k) {
                const double nan = std::numeric_limits<double>::quiet_NaN();
                e.rows.push_back({"data", row, c.index(ii, k), nan, c.data(ii, k), 0.0});
                e.rows.push_back({"product", row, c.index(ii, k), nan, c.product(ii, k), c.product_se(ii, k)});
                e.rows.push_back({"cumulative", row, c.index(ii, k), nan, c.cumulative(ii, k), c.cumulative_se(ii, k)});
            }
        }
    }
    return e;
}

} // namespace lfgam
