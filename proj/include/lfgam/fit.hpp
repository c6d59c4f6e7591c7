#pragma once

// Penalized IRLS with outer smoothing parameter selection by GCV.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgam/family.hpp"
#include "lfgam/formula.hpp"
#include "lfgam/terms.hpp"

namespace lfgam {

struct PirlsControl {
    int max_iter = 200;
    double tol = 1e-8;
    int max_halvings = 30;
};

namespace detail {

/// Factorization of H = X'WX + S_lambda in the eigenbasis of the penalty,
/// with symmetric diagonal scaling before the Cholesky step so that fits
/// with very large smoothing parameters stay well conditioned. The basis is
/// built per connected block of S_lambda.
class PenalizedFactor {
public:
    PenalizedFactor() = default;

    /// `S_total` is the unweighted sum of the penalties; it fixes the
    /// penalty null space independently of the smoothing parameters.
    PenalizedFactor(const Matrix& XtWX, const Matrix& S_lambda, const Matrix& S_total) {
        const Eigen::Index p = XtWX.rows();
        U_ = Matrix::Zero(p, p);
        Vector e = Vector::Zero(p);
        std::vector<Eigen::Index> parent(static_cast<std::size_t>(p));
        for (Eigen::Index i = 0; i < p; ++i) parent[i] = i;
        auto root = [&](Eigen::Index i) {
            while (parent[i] != i) i = parent[i] = parent[parent[i]];
            return i;
        };
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i + 1; j < p; ++j)
                if (S_lambda(i, j) != 0.0 || S_total(i, j) != 0.0) parent[root(i)] = root(j);
        std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(p));
        for (Eigen::Index i = 0; i < p; ++i) groups[root(i)].push_back(i);
        for (const auto& g : groups) {
            if (g.empty()) continue;
            const auto m = static_cast<Eigen::Index>(g.size());
            Matrix block(m, m);
            for (Eigen::Index a = 0; a < m; ++a)
                for (Eigen::Index b = 0; b < m; ++b) block(a, b) = S_lambda(g[a], g[b]);
            // null space from the scale-free total penalty, then the
            // eigenbasis of S_lambda restricted to its complement
            Matrix total(m, m);
            for (Eigen::Index a = 0; a < m; ++a)
                for (Eigen::Index b = 0; b < m; ++b) total(a, b) = S_total(g[a], g[b]);
            const Eigen::SelfAdjointEigenSolver<Matrix> et(total);
            const double top = et.eigenvalues().cwiseAbs().maxCoeff();
            Eigen::Index nnull = 0;
            while (nnull < m && et.eigenvalues()(nnull) <= 1e-9 * top) ++nnull;
            const Matrix Ur = et.eigenvectors().rightCols(m - nnull);
            Matrix Ub = et.eigenvectors();
            Vector eb = Vector::Zero(m);
            if (nnull < m) {
                const Eigen::SelfAdjointEigenSolver<Matrix> es(Ur.transpose() * block * Ur);
                Ub << Ur * es.eigenvectors(), et.eigenvectors().leftCols(nnull);
                eb.head(m - nnull) = es.eigenvalues().cwiseMax(0.0);
            }
            for (Eigen::Index a = 0; a < m; ++a) {
                e(g[a]) = eb(a);
                for (Eigen::Index b = 0; b < m; ++b) U_(g[b], g[a]) = Ub(b, a);
            }
        }
        Matrix A = U_.transpose() * XtWX * U_;
        A.diagonal() += e;
        d_ = Vector(p);
        for (Eigen::Index i = 0; i < p; ++i) d_(i) = A(i, i) > 0 ? 1.0 / std::sqrt(A(i, i)) : 1.0;
        A = d_.asDiagonal() * A * d_.asDiagonal();
        llt_.compute(A);
        if (llt_.info() != Eigen::Success) {
            A.diagonal().array() += 1e-10 * A.trace() / static_cast<double>(p);
            llt_.compute(A);
            ridge_used_ = true;
            if (llt_.info() != Eigen::Success)
                throw Error(ErrorKind::Fit, "penalized Hessian is not positive definite even after ridge; "
                                            "the model is not identifiable (reduce k or add penalties)");
        }
    }

    [[nodiscard]] Matrix solve(const Matrix& rhs) const {
        return U_ * (d_.asDiagonal() * llt_.solve(d_.asDiagonal() * (U_.transpose() * rhs)));
    }

    [[nodiscard]] Matrix inverse() const {
        const Matrix L = llt_.solve(Matrix::Identity(d_.size(), d_.size()));
        const Matrix T = U_ * d_.asDiagonal();
        Matrix out = T * L * T.transpose();
        return 0.5 * (out + out.transpose());
    }

    [[nodiscard]] bool ridge_used() const noexcept { return ridge_used_; }

private:
    Matrix U_;
    Vector d_;
    Eigen::LLT<Matrix> llt_;
    bool ridge_used_ = false;
};

} // namespace detail

struct PirlsResult {
    Vector beta;
    Vector eta;   // includes the offset
    Vector mu;
    Vector w;     // working weights of the final solve
    Vector z;     // working response of the final solve, offset removed
    Matrix XtWX;
    Matrix H;     // XtWX + S_lambda
    detail::PenalizedFactor factor;  // of H
    double deviance = 0;
    double penalized_deviance = 0;
    int iterations = 0;
    bool converged = false;
    bool ridge_used = false;
    std::string message;
};

namespace detail {

struct WorkingModel {
    Vector w;
    Vector z;
};

inline WorkingModel working_model(const Family& fam, const Vector& y, const Vector& eta, const Vector& mu,
                                  const Vector& offset, const Vector& prior_w, int iteration) {
    const Eigen::Index n = y.size();
    WorkingModel wm{Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = fam.mu_eta(eta(i));
        const double v = fam.variance(mu(i));
        wm.w(i) = prior_w(i) * d * d / v;
        wm.z(i) = eta(i) - offset(i) + (y(i) - mu(i)) / d;
        if (!std::isfinite(wm.w(i)) || !std::isfinite(wm.z(i)) || wm.w(i) < 0)
            throw Error(ErrorKind::Fit, "non-finite working weight at observation " + std::to_string(i) +
                                            " in PIRLS iteration " + std::to_string(iteration) +
                                            " (mu=" + std::to_string(mu(i)) + ", eta=" + std::to_string(eta(i)) + ")");
    }
    return wm;
}

inline Matrix weighted_crossprod(const Matrix& X, const Vector& w) {
    const Matrix Xw = w.cwiseSqrt().asDiagonal() * X;
    Matrix out = Xw.transpose() * Xw;
    return out;
}

inline Vector linkinv(const Family& fam, const Vector& eta) {
    Vector mu(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) mu(i) = fam.linkinv(eta(i));
    return mu;
}

} // namespace detail

/// Penalized IRLS at fixed penalty S_lambda = sum_j lambda_j S_j. `S_total`
/// (sum_j S_j) identifies the penalty null space; it defaults to S_lambda.
inline PirlsResult pirls(const Matrix& X, const Matrix& S_lambda, const Family& fam, const Vector& y,
                         const Vector& offset, const Vector& prior_w, const PirlsControl& ctl = {},
                         const Matrix& S_total = Matrix()) {
    const Eigen::Index n = X.rows();
    if (y.size() != n || offset.size() != n || prior_w.size() != n)
        throw Error(ErrorKind::Dimension, "response, offset and weights must match the design rows");
    PirlsResult r;

    auto solve_step = [&](const detail::WorkingModel& wm) {
        r.XtWX = detail::weighted_crossprod(X, wm.w);
        r.H = r.XtWX + S_lambda;
        const Vector rhs = X.transpose() * wm.w.cwiseProduct(wm.z);
        r.w = wm.w;
        r.z = wm.z;
        r.factor = detail::PenalizedFactor(r.XtWX, S_lambda, S_total.size() ? S_total : S_lambda);
        r.ridge_used = r.factor.ridge_used();
        return Vector(r.factor.solve(rhs));
    };
    auto evaluate = [&](const Vector& beta) {
        r.beta = beta;
        r.eta = X * beta + offset;
        r.mu = detail::linkinv(fam, r.eta);
        r.deviance = fam.deviance(y, r.mu, prior_w);
        r.penalized_deviance = r.deviance + beta.dot(S_lambda * beta);
    };

    if (fam.kind == FamilyKind::Gaussian) {
        const detail::WorkingModel wm{prior_w, y - offset};
        evaluate(solve_step(wm));
        r.iterations = 1;
        r.converged = true;
        return r;
    }

    Vector mu = fam.initial_mu(y);
    Vector eta(n);
    for (Eigen::Index i = 0; i < n; ++i) eta(i) = fam.link(mu(i));
    double old_pdev = std::numeric_limits<double>::infinity();
    Vector old_beta;

    for (int iter = 1; iter <= ctl.max_iter; ++iter) {
        r.iterations = iter;
        const auto wm = detail::working_model(fam, y, eta, mu, offset, prior_w, iter);
        Vector beta = solve_step(wm);
        const Matrix XtWX = r.XtWX;
        const Matrix H = r.H;
        const detail::PenalizedFactor factor = r.factor;
        const Vector w = r.w;
        const Vector z = r.z;
        evaluate(beta);

        if (iter > 1) {
            int halvings = 0;
            while ((!std::isfinite(r.penalized_deviance) || r.penalized_deviance > old_pdev) &&
                   halvings < ctl.max_halvings) {
                beta = 0.5 * (beta + old_beta);
                evaluate(beta);
                ++halvings;
            }
            if (!std::isfinite(r.penalized_deviance))
                throw Error(ErrorKind::Fit, "PIRLS step halving failed to find a finite deviance at iteration " +
                                                std::to_string(iter));
            if (r.penalized_deviance > old_pdev) {
                evaluate(old_beta);
                r.message = "step halving exhausted at iteration " + std::to_string(iter);
                r.converged = false;
                break;
            }
            // restore the working quantities of the accepted solve
            r.XtWX = XtWX;
            r.H = H;
            r.factor = factor;
            r.w = w;
            r.z = z;
            if (std::abs(r.penalized_deviance - old_pdev) < ctl.tol * (std::abs(r.penalized_deviance) + 0.1)) {
                r.converged = true;
                break;
            }
        } else if (!std::isfinite(r.penalized_deviance)) {
            throw Error(ErrorKind::Fit, "PIRLS produced a non-finite deviance at the first iteration");
        }
        old_pdev = r.penalized_deviance;
        old_beta = r.beta;
        eta = r.eta;
        mu = r.mu;
    }
    if (!r.converged) {
        if (r.message.empty()) r.message = "PIRLS did not converge in " + std::to_string(ctl.max_iter) + " iterations";
        return r;
    }
    // one more Newton step from the converged point so that the stored
    // working model and coefficients satisfy the penalized normal equations
    const auto wm = detail::working_model(fam, y, r.eta, r.mu, offset, prior_w, r.iterations + 1);
    const Vector beta = solve_step(wm);
    evaluate(beta);
    return r;
}

/// Diagonal of H^{-1} X'WX; its sum is the effective degrees of freedom.
inline Vector edf_diagonal(const PirlsResult& r) { return r.factor.solve(r.XtWX).diagonal(); }

inline constexpr double kInfeasibleScore = std::numeric_limits<double>::max();

/// GCV score n D / (n - gamma * edf)^2, or the infeasible sentinel.
inline double gcv_value(double n, double deviance, double edf, double gamma) {
    const double denom = n - gamma * edf;
    if (!(denom > 1e-8 * n) || !std::isfinite(deviance)) return kInfeasibleScore;
    return n * deviance / (denom * denom);
}

/// A penalized GLM with everything but the smoothing parameters fixed.
struct PenalizedProblem {
    const ModelMatrix* model = nullptr;
    Family family;
    Vector y;
    Vector weights;
    double gamma = 1.0;
    PirlsControl control;

    [[nodiscard]] Vector lambdas(const Vector& log_lambda) const { return log_lambda.array().exp(); }

    [[nodiscard]] PirlsResult fit_at(const Vector& log_lambda) const {
        return pirls(model->X, model->penalty_sum(lambdas(log_lambda)), family, y, model->offset, weights, control,
                     model->penalty_sum(Vector::Ones(model->n_slots())));
    }
};

struct ScoreResult {
    double score = kInfeasibleScore;
    double edf = 0;
    double deviance = 0;
    bool feasible = false;
};

/// GCV at the converged fit for natural-log smoothing parameters.
inline ScoreResult gcv_score(const PenalizedProblem& prob, const Vector& log_lambda) {
    ScoreResult s;
    try {
        const PirlsResult r = prob.fit_at(log_lambda);
        if (!r.converged) return s;
        s.edf = edf_diagonal(r).sum();
        s.deviance = r.deviance;
        s.score = gcv_value(static_cast<double>(prob.y.size()), r.deviance, s.edf, prob.gamma);
        s.feasible = s.score != kInfeasibleScore;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Fit) throw;
    }
    return s;
}

struct TracePoint {
    Vector log_lambda;
    double score = 0;
};

struct LambdaSearch {
    Vector log_lambda;  // natural log
    double score = kInfeasibleScore;
    std::vector<TracePoint> trace;
    int evaluations = 0;
    bool converged = false;
};

struct LambdaSearchControl {
    double grid_lower = -6;  // log10
    double grid_upper = 6;
    int grid_points = 7;
    int sweeps = 2;
    double simplex_tol = 1e-7;
    int max_evaluations = 500;
    double bound = 15;       // log10 lambda is clamped to [-bound, bound]
};

/// Coordinate-wise log10 grid search followed by Nelder-Mead on the joint
/// log smoothing parameter vector.
inline LambdaSearch optimize_lambda(const PenalizedProblem& prob, const LambdaSearchControl& ctl = {}) {
    const int m = prob.model->n_slots();
    if (m == 0) throw Error(ErrorKind::Validation, "model has no smoothing parameters to optimize");
    LambdaSearch out;
    const double ln10 = std::numbers::ln10;

    auto score = [&](Vector rho) {
        rho = rho.cwiseMax(-ctl.bound).cwiseMin(ctl.bound);
        const Vector ll = rho * ln10;
        const double s = gcv_score(prob, ll).score;
        out.trace.push_back({ll, s});
        ++out.evaluations;
        return s;
    };

    Vector rho = Vector::Zero(m);
    double best = kInfeasibleScore;
    bool any_feasible = false;
    for (int sweep = 0; sweep < ctl.sweeps; ++sweep) {
        for (int j = 0; j < m; ++j) {
            double best_j = kInfeasibleScore;
            double arg_j = rho(j);
            for (int g = 0; g < ctl.grid_points; ++g) {
                Vector trial = rho;
                trial(j) = ctl.grid_lower + (ctl.grid_upper - ctl.grid_lower) * g / (ctl.grid_points - 1);
                const double s = score(trial);
                if (s != kInfeasibleScore) any_feasible = true;
                if (s < best_j) {
                    best_j = s;
                    arg_j = trial(j);
                }
            }
            rho(j) = arg_j;
            best = std::min(best, best_j);
        }
    }
    if (!any_feasible)
        throw Error(ErrorKind::Fit, "no smoothing parameter on the search grid gives a feasible fit; try a smaller k");

    // Nelder-Mead
    std::vector<Vector> simplex{rho};
    std::vector<double> f{best};
    for (int j = 0; j < m; ++j) {
        Vector v = rho;
        v(j) += 1.0;
        simplex.push_back(v);
        f.push_back(score(v));
    }
    int evals = m;
    std::vector<int> order(m + 1);
    auto sort_simplex = [&] {
        for (int i = 0; i <= m; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
        std::vector<Vector> s2;
        std::vector<double> f2;
        for (int i : order) {
            s2.push_back(simplex[i]);
            f2.push_back(f[i]);
        }
        simplex = std::move(s2);
        f = std::move(f2);
    };

    while (evals < ctl.max_evaluations) {
        sort_simplex();
        const double spread = f[m] - f[0];
        if (f[m] != kInfeasibleScore && spread <= ctl.simplex_tol * std::abs(f[0])) {
            out.converged = true;
            break;
        }
        Vector centroid = Vector::Zero(m);
        for (int i = 0; i < m; ++i) centroid += simplex[i];
        centroid /= m;
        const Vector xr = centroid + (centroid - simplex[m]);
        const double fr = score(xr);
        ++evals;
        if (fr < f[0]) {
            const Vector xe = centroid + 2.0 * (centroid - simplex[m]);
            const double fe = score(xe);
            ++evals;
            if (fe < fr) {
                simplex[m] = xe;
                f[m] = fe;
            } else {
                simplex[m] = xr;
                f[m] = fr;
            }
            continue;
        }
        if (fr < f[m - 1]) {
            simplex[m] = xr;
            f[m] = fr;
            continue;
        }
        const bool outside = fr < f[m];
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                                  : Vector(centroid + 0.5 * (simplex[m] - centroid));
        const double fc = score(xc);
        ++evals;
        if ((outside && fc <= fr) || (!outside && fc < f[m])) {
            simplex[m] = xc;
            f[m] = fc;
            continue;
        }
        for (int i = 1; i <= m; ++i) {
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
            f[i] = score(simplex[i]);
            ++evals;
        }
    }
    sort_simplex();
    out.log_lambda = simplex[0].cwiseMax(-ctl.bound).cwiseMin(ctl.bound) * ln10;
    out.score = f[0];
    return out;
}

/// Pearson scale estimate; 1 for the fixed-scale families.
inline double estimate_scale(const Family& fam, const Vector& y, const Vector& mu, const Vector& w, double edf) {
    if (fam.fixed_scale()) return 1.0;
    const double n = static_cast<double>(y.size());
    if (!(n > edf)) throw Error(ErrorKind::Fit, "cannot estimate the scale: edf is not below the sample size");
    double ss = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) ss += w(i) * (y(i) - mu(i)) * (y(i) - mu(i)) / fam.variance(mu(i));
    return ss / (n - edf);
}

/// -2 log-likelihood + 2 (edf + estimated scale/shape parameters). The
/// Gaussian likelihood uses the maximum likelihood variance D / n.
inline double model_aic(const Family& fam, const Vector& y, const Vector& mu, const Vector& w, double edf,
                        bool kappa_estimated) {
    double extra = 0;
    double phi = 1.0;
    if (fam.kind == FamilyKind::Gaussian) {
        phi = std::max(fam.deviance(y, mu, w) / static_cast<double>(y.size()), 1e-300);
        extra = 1;
    } else if (fam.kind == FamilyKind::NegBin && kappa_estimated) {
        extra = 1;
    }
    return -2.0 * fam.loglik(y, mu, w, phi) + 2.0 * (edf + extra);
}

struct KappaSearch {
    double kappa = 1;
    double aic = 0;
    bool boundary = false;
    std::vector<std::pair<double, double>> trace;  // (log kappa, aic)
};

struct KappaSearchControl {
    double lower = 1e-4;
    double upper = 1e2;
    double tol = 1e-3;  // on log kappa
};

/// Golden-section search on log kappa minimizing the AIC, with the
/// smoothing parameters re-optimized at every probe.
inline KappaSearch estimate_nb_kappa(PenalizedProblem prob, const KappaSearchControl& ctl = {},
                                     const LambdaSearchControl& lctl = {}) {
    KappaSearch out;
    auto aic_at = [&](double log_kappa) {
        prob.family = Family::negbin(std::exp(log_kappa));
        double a = std::numeric_limits<double>::infinity();
        try {
            Vector ll = Vector::Zero(prob.model->n_slots());
            if (prob.model->n_slots() > 0) ll = optimize_lambda(prob, lctl).log_lambda;
            const PirlsResult r = prob.fit_at(ll);
            const double edf = edf_diagonal(r).sum();
            a = model_aic(prob.family, prob.y, r.mu, prob.weights, edf, true);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Fit) throw;
        }
        out.trace.emplace_back(log_kappa, a);
        return a;
    };

    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(ctl.lower);
    double b = std::log(ctl.upper);
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = aic_at(c);
    double fd = aic_at(d);
    while (b - a > ctl.tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = aic_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = aic_at(d);
        }
    }
    double best_x = fc < fd ? c : d;
    double best_f = std::min(fc, fd);
    const double flo = aic_at(std::log(ctl.lower));
    const double fhi = aic_at(std::log(ctl.upper));
    if (flo <= best_f) {
        best_x = std::log(ctl.lower);
        best_f = flo;
    }
    if (fhi < best_f) {
        best_x = std::log(ctl.upper);
        best_f = fhi;
    }
    if (!std::isfinite(best_f)) throw Error(ErrorKind::Fit, "negative binomial fit failed for every kappa probed");
    out.kappa = std::exp(best_x);
    out.aic = best_f;
    out.boundary = best_x - std::log(ctl.lower) < 2 * ctl.tol || std::log(ctl.upper) - best_x < 2 * ctl.tol;
    return out;
}

} // namespace lfgam
