#pragma once

// Univariate spline bases: clamped cubic B-splines, periodic cubic
// B-splines and random-effect indicator bases, together with their
// integrated squared second derivative penalties and the sum-to-zero
// identifiability reparameterization.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgam/errors.hpp"

namespace lfgam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class BasisKind { CubicBSpline, CyclicCubic, RandomEffect };
enum class KnotRule { Quantile, Uniform };

inline const char* to_string(BasisKind kind) {
    switch (kind) {
    case BasisKind::CubicBSpline: return "cr";
    case BasisKind::CyclicCubic: return "cc";
    case BasisKind::RandomEffect: return "re";
    }
    return "?";
}

inline const char* to_string(KnotRule rule) {
    return rule == KnotRule::Quantile ? "quantile" : "uniform";
}

struct BasisSpec {
    BasisKind kind = BasisKind::CubicBSpline;
    int k = 10;
    int penalty_order = 2;
    KnotRule knot_rule = KnotRule::Quantile;

    [[nodiscard]] bool is_spline() const noexcept { return kind != BasisKind::RandomEffect; }

    [[nodiscard]] int null_space_dim() const noexcept {
        switch (kind) {
        case BasisKind::CubicBSpline: return 2;
        case BasisKind::CyclicCubic: return 1;
        case BasisKind::RandomEffect: return 0;
        }
        return 0;
    }

    void validate() const {
        if (kind == BasisKind::RandomEffect) {
            if (k < 1) throw Error(ErrorKind::Validation, "random-effect basis needs at least one level");
            return;
        }
        if (penalty_order != 2)
            throw Error(ErrorKind::Validation, "spline bases support penalty order 2 only");
        if (k < penalty_order + 2)
            throw Error(ErrorKind::Validation,
                        "spline basis dimension k=" + std::to_string(k) + " must be at least " +
                            std::to_string(penalty_order + 2));
    }

    friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

/// Full knot sequence of a basis.
///
/// Cubic kind: k + 4 knots, the two boundary knots each repeated four times.
/// Cyclic kind: k + 1 strictly increasing knots; the first and last define the period.
/// Random-effect kind: empty.
struct KnotVector {
    std::vector<double> knots;

    [[nodiscard]] double lower() const { return knots.front(); }
    [[nodiscard]] double upper() const { return knots.back(); }

    /// Knots strictly inside the boundary.
    [[nodiscard]] std::vector<double> interior() const {
        std::vector<double> out;
        if (knots.empty()) return out;
        for (double t : knots)
            if (t > lower() && t < upper()) out.push_back(t);
        return out;
    }

    friend bool operator==(const KnotVector&, const KnotVector&) = default;
};

struct PenaltyMatrix {
    Matrix S;
    int null_space_dim = 0;
};

/// Maps constrained coefficients to the full basis: beta_full = Z * beta.
struct ConstraintTransform {
    Matrix Z;
    int constraints = 0;
};

namespace detail {

inline std::vector<double> distinct_sorted(std::span<const double> x) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

// Linear-interpolation quantile of sorted values at probability p.
inline double quantile_sorted(const std::vector<double>& u, double p) {
    const double pos = p * static_cast<double>(u.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, u.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return u[lo] + frac * (u[hi] - u[lo]);
}

inline void check_knots(const BasisSpec& spec, const KnotVector& kv) {
    const auto& t = kv.knots;
    const std::size_t expected = spec.kind == BasisKind::CubicBSpline ? spec.k + 4 : spec.k + 1;
    if (t.size() != expected)
        throw Error(ErrorKind::Validation, "knot vector has " + std::to_string(t.size()) +
                                               " entries, expected " + std::to_string(expected));
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] >= t[i - 1])) throw Error(ErrorKind::Validation, "knots must be nondecreasing");
    if (!(kv.upper() > kv.lower())) throw Error(ErrorKind::Validation, "knot range is empty");
}

// Derivatives 0..nd of the p+1 B-splines of degree p that are nonzero on
// span s of U (U[s] <= x <= U[s+1], U[s] < U[s+1]). Row d holds the d-th
// derivative of N_{s-p}, ..., N_s.
template <int p>
Eigen::Matrix<double, p + 1, p + 1> bspline_derivs(const std::vector<double>& U, int s, double x,
                                                   int nd) {
    double ndu[p + 1][p + 1];
    double left[p + 1];
    double right[p + 1];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - U[s + 1 - j];
        right[j] = U[s + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    Eigen::Matrix<double, p + 1, p + 1> ders = Eigen::Matrix<double, p + 1, p + 1>::Zero();
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu[j][p];

    double a[2][p + 1];
    for (int r = 0; r <= p; ++r) {
        int s1 = 0;
        int s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= nd; ++k) {
        ders.row(k) *= factor;
        factor *= (p - k);
    }
    return ders;
}

// Periodic extension of the cyclic knots: three extra knots on each side.
inline std::vector<double> cyclic_extended(const KnotVector& kv) {
    const auto& t = kv.knots;
    const int k = static_cast<int>(t.size()) - 1;
    const double period = kv.upper() - kv.lower();
    std::vector<double> e(k + 7);
    for (int i = 0; i < k + 7; ++i) {
        const int j = i - 3;
        const int wraps = j < 0 ? -1 : (j > k ? 1 : 0);
        e[i] = t[j - wraps * k] + wraps * period;
    }
    return e;
}

// Span index s in the clamped cubic knots with U[s] <= x < U[s+1]; the
// right boundary belongs to the last nonempty span.
inline int clamped_span(const std::vector<double>& U, int first, int last, double x) {
    auto it = std::upper_bound(U.begin() + first, U.begin() + last + 1, x);
    int s = static_cast<int>(it - U.begin()) - 1;
    s = std::clamp(s, first, last - 1);
    while (s > first && !(U[s] < U[s + 1])) --s;
    return s;
}

inline void add_row_derivs(const BasisSpec& spec, const KnotVector& kv,
                           const std::vector<double>& ext, double x, int deriv,
                           Matrix& B, Eigen::Index i) {
    auto row = B.row(i);
    const int k = spec.k;
    if (spec.kind == BasisKind::CubicBSpline) {
        const int s = clamped_span(kv.knots, 3, k, x);
        const auto d = bspline_derivs<3>(kv.knots, s, x, deriv);
        for (int j = 0; j <= 3; ++j) row(s - 3 + j) += d(deriv, j);
    } else {
        const int s = clamped_span(ext, 3, k + 3, x);
        const auto d = bspline_derivs<3>(ext, s, x, deriv);
        for (int j = 0; j <= 3; ++j) row((s - 3 + j) % k) += d(deriv, j);
    }
}

} // namespace detail

/// Places knots for a spline basis on the range of `x`.
inline KnotVector place_knots(std::span<const double> x, const BasisSpec& spec) {
    spec.validate();
    if (spec.kind == BasisKind::RandomEffect) return {};
    for (double v : x)
        if (!std::isfinite(v)) throw Error(ErrorKind::DegenerateData, "non-finite covariate value");
    const auto u = detail::distinct_sorted(x);
    if (u.size() < 2)
        throw Error(ErrorKind::DegenerateData, "covariate needs at least 2 distinct values");

    const bool cyclic = spec.kind == BasisKind::CyclicCubic;
    // number of distinct knot positions including both boundaries
    const int n_interior = cyclic ? spec.k - 1 : spec.k - 4;
    const std::size_t required = static_cast<std::size_t>(n_interior) + 2;
    if (u.size() < required)
        throw Error(ErrorKind::DegenerateData,
                    "covariate has " + std::to_string(u.size()) + " distinct values but the basis needs " +
                        std::to_string(required) + " distinct knots; reduce k");

    const double lo = u.front();
    const double hi = u.back();
    std::vector<double> interior(n_interior);
    for (int j = 1; j <= n_interior; ++j) {
        const double p = static_cast<double>(j) / (n_interior + 1);
        interior[j - 1] = spec.knot_rule == KnotRule::Uniform ? lo + p * (hi - lo)
                                                              : detail::quantile_sorted(u, p);
    }

    KnotVector kv;
    if (cyclic) {
        kv.knots.push_back(lo);
        kv.knots.insert(kv.knots.end(), interior.begin(), interior.end());
        kv.knots.push_back(hi);
    } else {
        kv.knots.assign(4, lo);
        kv.knots.insert(kv.knots.end(), interior.begin(), interior.end());
        kv.knots.insert(kv.knots.end(), 4, hi);
    }
    return kv;
}

/// Evaluates the basis (or its `deriv`-th derivative, deriv <= 2) at each
/// x. For the random-effect kind the inputs are zero-based level codes.
inline Matrix eval_basis(const BasisSpec& spec, const KnotVector& kv, std::span<const double> x,
                         int deriv = 0) {
    spec.validate();
    const auto m = static_cast<Eigen::Index>(x.size());
    Matrix B = Matrix::Zero(m, spec.k);

    if (spec.kind == BasisKind::RandomEffect) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double c = x[i];
            if (c != std::floor(c) || c < 0 || c >= spec.k)
                throw Error(ErrorKind::Validation,
                            "random-effect level code " + std::to_string(c) + " out of range");
            if (deriv == 0) B(i, static_cast<Eigen::Index>(c)) = 1.0;
        }
        return B;
    }

    if (deriv < 0 || deriv > 2) throw Error(ErrorKind::Validation, "derivative order must be 0, 1 or 2");
    detail::check_knots(spec, kv);
    const bool cyclic = spec.kind == BasisKind::CyclicCubic;
    const std::vector<double> ext = cyclic ? detail::cyclic_extended(kv) : std::vector<double>{};
    const double lo = kv.lower();
    const double hi = kv.upper();
    const double period = hi - lo;

    for (Eigen::Index i = 0; i < m; ++i) {
        double v = x[i];
        if (!std::isfinite(v))
            throw Error(ErrorKind::Extrapolation, "non-finite evaluation point");
        if (v < lo || v > hi) {
            if (!cyclic)
                throw Error(ErrorKind::Extrapolation,
                            "value " + std::to_string(v) + " outside basis range [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
            v = lo + std::fmod(v - lo, period);
            if (v < lo) v += period;
        }
        detail::add_row_derivs(spec, kv, ext, v, deriv, B, i);
    }
    return B;
}

inline Matrix eval_basis(const BasisSpec& spec, const KnotVector& kv, const Vector& x, int deriv = 0) {
    return eval_basis(spec, kv, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                      deriv);
}

/// Integrated squared second-derivative penalty, by 3-point Gauss-Legendre
/// quadrature on every inter-knot interval (exact for the piecewise
/// quadratic integrand). Random-effect kind gets the identity.
inline PenaltyMatrix penalty_matrix(const BasisSpec& spec, const KnotVector& kv) {
    spec.validate();
    PenaltyMatrix out;
    out.null_space_dim = spec.null_space_dim();
    if (spec.kind == BasisKind::RandomEffect) {
        out.S = Matrix::Identity(spec.k, spec.k);
        return out;
    }
    detail::check_knots(spec, kv);

    static constexpr std::array<double, 3> nodes{-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr std::array<double, 3> weights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

    const auto breaks = detail::distinct_sorted(kv.knots);
    std::vector<double> pts;
    std::vector<double> wts;
    for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
        const double half = 0.5 * (breaks[j + 1] - breaks[j]);
        const double mid = 0.5 * (breaks[j + 1] + breaks[j]);
        for (int q = 0; q < 3; ++q) {
            pts.push_back(mid + half * nodes[q]);
            wts.push_back(half * weights[q]);
        }
    }
    const Matrix D2 = eval_basis(spec, kv, std::span<const double>(pts), 2);
    const Vector w = Eigen::Map<const Vector>(wts.data(), static_cast<Eigen::Index>(wts.size()));
    out.S = D2.transpose() * w.asDiagonal() * D2;
    out.S = 0.5 * (out.S + out.S.transpose()).eval();
    return out;
}

/// Orthonormal basis Z of the null space of the constraint row 1'B
/// (Householder), so that column sums of B*Z vanish.
inline ConstraintTransform sum_to_zero_transform(const Matrix& B) {
    const Eigen::Index k = B.cols();
    const Vector c = B.colwise().sum().transpose();
    Eigen::HouseholderQR<Matrix> qr(c);
    const Matrix Q = qr.householderQ() * Matrix::Identity(k, k);
    return {Q.rightCols(k - 1), 1};
}

inline ConstraintTransform identity_transform(Eigen::Index k) {
    return {Matrix::Identity(k, k), 0};
}

/// Throws an identifiability error when some coefficient direction is
/// neither reached by the design nor penalized, which makes the penalized
/// Hessian singular for every choice of smoothing parameters.
inline void check_identifiable(const Matrix& design, const std::vector<Matrix>& penalties,
                               const std::string& label) {
    const Eigen::Index p = design.cols();
    if (p == 0) return;
    Matrix M = design.transpose() * design;
    const double dn = M.norm();
    if (dn > 0) M /= dn;
    for (const auto& S : penalties) {
        const double sn = S.norm();
        if (sn > 0) M += S / sn;
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    const double bottom = es.eigenvalues().minCoeff();
    if (!(top > 0) || bottom <= 1e-10 * top)
        throw Error(ErrorKind::Identifiability,
                    "term " + label + " is not identifiable: constrained basis is rank deficient");
}

/// Orthonormal basis of the coefficient directions that the design or some
/// penalty reaches; empty when every direction is reached.
inline std::optional<Matrix> identifiable_directions(const Matrix& design, const std::vector<Matrix>& penalties) {
    const Eigen::Index p = design.cols();
    if (p == 0) return std::nullopt;
    Matrix M = design.transpose() * design;
    const double dn = M.norm();
    if (dn > 0) M /= dn;
    for (const auto& S : penalties) {
        const double sn = S.norm();
        if (sn > 0) M += S / sn;
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const double top = es.eigenvalues().maxCoeff();
    Eigen::Index dropped = 0;
    while (dropped < p && es.eigenvalues()(dropped) <= 1e-10 * top) ++dropped;
    if (dropped == 0) return std::nullopt;
    return Matrix(es.eigenvectors().rightCols(p - dropped));
}

struct CenteredBasis {
    Matrix design;
    Matrix penalty;
    ConstraintTransform transform;
};

/// Absorbs the sum-to-zero constraint into the basis and penalty.
inline CenteredBasis center_constraint(const Matrix& B, const PenaltyMatrix& S,
                                       const std::string& label = "smooth") {
    CenteredBasis out;
    out.transform = sum_to_zero_transform(B);
    const Matrix& Z = out.transform.Z;
    out.design = B * Z;
    out.penalty = Z.transpose() * S.S * Z;
    out.penalty = 0.5 * (out.penalty + out.penalty.transpose()).eval();
    check_identifiable(out.design, {out.penalty}, label);
    return out;
}

/// Coefficients reproducing the constant (first column) and identity
/// function (second column) in a clamped cubic B-spline basis.
inline Matrix polynomial_coefficients(const BasisSpec& spec, const KnotVector& kv) {
    Matrix out(spec.k, 2);
    for (int i = 0; i < spec.k; ++i) {
        out(i, 0) = 1.0;
        if (spec.kind == BasisKind::CubicBSpline)
            out(i, 1) = (kv.knots[i + 1] + kv.knots[i + 2] + kv.knots[i + 3]) / 3.0;
        else
            out(i, 1) = 0.0;
    }
    return out;
}

} // namespace lfgam
