#include <gtest/gtest.h>

#include "oracle/oracle.hpp"
#include "support.hpp"

using namespace lfgam;
using support::error_kind;

namespace {

BasisSpec cubic_spec(int k, KnotRule rule = KnotRule::Quantile) {
    BasisSpec s;
    s.k = k;
    s.knot_rule = rule;
    return s;
}

BasisSpec cyclic_spec(int k) {
    BasisSpec s;
    s.kind = BasisKind::CyclicCubic;
    s.k = k;
    s.knot_rule = KnotRule::Uniform;
    return s;
}

std::vector<double> range(int lo, int hi) {
    std::vector<double> v;
    for (int i = lo; i <= hi; ++i) v.push_back(i);
    return v;
}

int count_null(const Matrix& S) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    int n = 0;
    for (double e : es.eigenvalues())
        if (std::abs(e) < 1e-10 * top) ++n;
    return n;
}

} // namespace

// ------------------------------------------------------------ place_knots

TEST(PlaceKnots, UniformSingleInteriorKnotIsCentered) {
    const auto x = range(0, 10);
    const KnotVector kv = place_knots(x, cubic_spec(5, KnotRule::Uniform));
    ASSERT_EQ(kv.interior().size(), 1u);
    EXPECT_DOUBLE_EQ(kv.interior()[0], 5.0);
    EXPECT_EQ(kv.knots.size(), 9u);
}

TEST(PlaceKnots, UniformTwoInteriorKnotsMatchEvenSpacing) {
    const auto x = range(0, 10);
    const KnotVector kv = place_knots(x, cubic_spec(6, KnotRule::Uniform));
    const auto in = kv.interior();
    ASSERT_EQ(in.size(), 2u);
    EXPECT_NEAR(in[0], 10.0 / 3.0, 1e-14);
    EXPECT_NEAR(in[1], 20.0 / 3.0, 1e-14);
}

TEST(PlaceKnots, BoundaryKnotsReplicatedAtDataExtremes) {
    const std::vector<double> x{3.5, -1.25, 7.0, 2.0, 0.5, 6.0, 4.0, 1.0};
    const KnotVector kv = place_knots(x, cubic_spec(5));
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(kv.knots[i], -1.25);
        EXPECT_EQ(kv.knots[kv.knots.size() - 1 - i], 7.0);
    }
}

TEST(PlaceKnots, QuantileRuleUsesDistinctValues) {
    // distinct values 0,1,4,...,100 with heavy duplication of 0
    std::vector<double> x(50, 0.0);
    for (int i = 0; i <= 10; ++i) x.push_back(i * i);
    const KnotVector kv = place_knots(x, cubic_spec(7));
    const auto in = kv.interior();
    ASSERT_EQ(in.size(), 3u);
    // linear interpolation of the order statistics of the 11 distinct values
    for (int j = 1; j <= 3; ++j) {
        const double h = 10.0 * j / 4.0;
        const int lo = static_cast<int>(h);
        const double expected = lo * lo + (h - lo) * ((lo + 1) * (lo + 1) - lo * lo);
        EXPECT_NEAR(in[j - 1], expected, 1e-12);
    }
}

TEST(PlaceKnots, TooFewDistinctValuesIsDegenerate) {
    const std::vector<double> x{1, 2, 3, 1, 2, 3};
    EXPECT_EQ(error_kind([&] { place_knots(x, cubic_spec(10)); }), ErrorKind::DegenerateData);
}

TEST(BasisSpecValidation, SplineNeedsRoomForNullSpace) {
    EXPECT_EQ(error_kind([] { cubic_spec(3).validate(); }), ErrorKind::Validation);
    EXPECT_NO_THROW(cubic_spec(4).validate());
}

// ------------------------------------------------------------ eval_basis

TEST(EvalBasis, CubicRowsSumToOne) {
    std::mt19937_64 rng(1);
    const Vector x = support::uniform_vector(rng, 400, -2.0, 5.0);
    std::vector<double> xs(x.data(), x.data() + x.size());
    for (int k : {4, 5, 8, 13}) {
        const KnotVector kv = place_knots(xs, cubic_spec(k));
        const Matrix B = eval_basis(cubic_spec(k), kv, x);
        EXPECT_LT((B.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12) << "k=" << k;
    }
}

TEST(EvalBasis, NoInteriorKnotsGivesBernsteinPolynomials) {
    const std::vector<double> x{0.0, 0.25, 0.5, 0.75, 1.0};
    const KnotVector kv = place_knots(x, cubic_spec(4));
    ASSERT_TRUE(kv.interior().empty());
    const Matrix B = eval_basis(cubic_spec(4), kv, Eigen::Map<const Vector>(x.data(), 5));
    for (int i = 0; i < 5; ++i) {
        const double t = x[i];
        const double bern[4] = {std::pow(1 - t, 3), 3 * t * std::pow(1 - t, 2), 3 * t * t * (1 - t), t * t * t};
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(B(i, j), bern[j], 1e-14);
    }
}

TEST(EvalBasis, MatchesCoxDeBoorOracle) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector data = support::uniform_vector(rng, 60, -3.0, 4.0);
        std::vector<double> xs(data.data(), data.data() + data.size());
        const BasisSpec spec = cubic_spec(5 + rep % 6);
        const KnotVector kv = place_knots(xs, spec);
        const Vector at = support::uniform_vector(rng, 50, kv.lower(), kv.upper());
        const Matrix B = eval_basis(spec, kv, at);
        for (Eigen::Index i = 0; i < at.size(); ++i)
            for (int j = 0; j < spec.k; ++j) EXPECT_NEAR(B(i, j), oracle::cubic(kv.knots, j, at(i)), 1e-13);
        // the right boundary belongs to the last basis function
        const Matrix end = eval_basis(spec, kv, Vector::Constant(1, kv.upper()));
        EXPECT_NEAR(end(0, spec.k - 1), 1.0, 1e-14);
    }
}

TEST(EvalBasis, DerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(3);
    const Vector data = support::uniform_vector(rng, 80, 0.0, 10.0);
    std::vector<double> xs(data.data(), data.data() + data.size());
    for (const BasisSpec& spec : {cubic_spec(8), cyclic_spec(8)}) {
        const KnotVector kv = place_knots(xs, spec);
        const double h = 1e-5;
        const Vector at = support::uniform_vector(rng, 20, kv.lower() + 0.01, kv.upper() - 0.01);
        const Matrix d1 = eval_basis(spec, kv, at, 1);
        const Matrix d2 = eval_basis(spec, kv, at, 2);
        const Matrix fp = eval_basis(spec, kv, Vector(at.array() + h));
        const Matrix fm = eval_basis(spec, kv, Vector(at.array() - h));
        const Matrix f0 = eval_basis(spec, kv, at);
        EXPECT_LT(((fp - fm) / (2 * h) - d1).cwiseAbs().maxCoeff(), 1e-6);
        // second differences are unreliable across knots, where b'' has kinks
        const Matrix fd2 = (fp - 2 * f0 + fm) / (h * h);
        EXPECT_LT((fd2 - d2).cwiseAbs().maxCoeff(), 1e-2);
    }
}

TEST(EvalBasis, RandomEffectIsOneHot) {
    Dataset d;
    d.add_factor("f", {"a", "b", "a"});
    BasisSpec re;
    re.kind = BasisKind::RandomEffect;
    re.k = 2;
    const auto& c = d.column("f");
    Vector codes(3);
    for (int i = 0; i < 3; ++i) codes(i) = c.codes[i];
    const Matrix B = eval_basis(re, KnotVector{}, codes);
    Matrix expected(3, 2);
    expected << 1, 0, 0, 1, 1, 0;
    EXPECT_EQ(B, expected);
}

TEST(EvalBasis, OutOfRangeIsExtrapolationError) {
    const auto x = range(0, 10);
    const BasisSpec spec = cubic_spec(6);
    const KnotVector kv = place_knots(x, spec);
    EXPECT_EQ(error_kind([&] { eval_basis(spec, kv, Vector::Constant(1, 10.5)); }), ErrorKind::Extrapolation);
    EXPECT_EQ(error_kind([&] { eval_basis(spec, kv, Vector::Constant(1, -1e-9)); }), ErrorKind::Extrapolation);
}

TEST(EvalBasis, CyclicEndpointsAgreeUpToSecondDerivative) {
    const auto x = range(0, 24);
    const BasisSpec spec = cyclic_spec(7);
    const KnotVector kv = place_knots(x, spec);
    for (int deriv = 0; deriv <= 2; ++deriv) {
        const Matrix lo = eval_basis(spec, kv, Vector::Constant(1, kv.lower()), deriv);
        const Matrix hi = eval_basis(spec, kv, Vector::Constant(1, kv.upper()), deriv);
        EXPECT_LT((lo - hi).cwiseAbs().maxCoeff(), deriv == 0 ? 1e-12 : 1e-8) << "deriv " << deriv;
    }
}

TEST(EvalBasis, CyclicReducesModuloThePeriod) {
    const auto x = range(0, 12);
    const BasisSpec spec = cyclic_spec(6);
    const KnotVector kv = place_knots(x, spec);
    const Vector a = (Vector(3) << 1.5, 7.25, 11.0).finished();
    const Vector shifted = a.array() + 12.0;
    const Vector back = a.array() - 24.0;
    EXPECT_LT((eval_basis(spec, kv, a) - eval_basis(spec, kv, shifted)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((eval_basis(spec, kv, a) - eval_basis(spec, kv, back)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((eval_basis(spec, kv, a).rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

// ------------------------------------------------------------ penalty_matrix

TEST(Penalty, AffineFunctionsAreInTheNullSpace) {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        const Vector data = support::uniform_vector(rng, 100, -5.0, 5.0);
        std::vector<double> xs(data.data(), data.data() + data.size());
        const BasisSpec spec = cubic_spec(6 + rep);
        const KnotVector kv = place_knots(xs, spec);
        const PenaltyMatrix S = penalty_matrix(spec, kv);
        const Matrix v = polynomial_coefficients(spec, kv);
        // the coefficient vectors do reproduce 1 and x
        const Matrix B = eval_basis(spec, kv, data);
        EXPECT_LT(((B * v.col(0)).array() - 1.0).abs().maxCoeff(), 1e-12);
        EXPECT_LT((B * v.col(1) - data).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((S.S * v).cwiseAbs().maxCoeff(), 1e-9 * S.S.norm());
    }
}

TEST(Penalty, MatchesTrapezoidOracle) {
    const auto x = range(0, 20);
    for (const BasisSpec& spec : {cubic_spec(8, KnotRule::Uniform), cyclic_spec(8)}) {
        const KnotVector kv = place_knots(x, spec);
        const Matrix ref = oracle::penalty_quadrature_reference(
            [&](double t) -> Eigen::RowVectorXd { return eval_basis(spec, kv, Vector::Constant(1, t), 2).row(0); },
            kv.lower(), kv.upper());
        EXPECT_LT((penalty_matrix(spec, kv).S - ref).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Penalty, SymmetricPsdWithDeclaredNullity) {
    std::mt19937_64 rng(5);
    const Vector data = support::uniform_vector(rng, 200, 0.0, 30.0);
    std::vector<double> xs(data.data(), data.data() + data.size());
    for (const BasisSpec& spec : {cubic_spec(10), cubic_spec(5), cyclic_spec(9), cyclic_spec(4)}) {
        const KnotVector kv = place_knots(xs, spec);
        const PenaltyMatrix S = penalty_matrix(spec, kv);
        EXPECT_EQ(S.S, S.S.transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> es(S.S);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
        EXPECT_EQ(count_null(S.S), S.null_space_dim);
        EXPECT_EQ(S.null_space_dim, spec.null_space_dim());
    }
    EXPECT_EQ(cubic_spec(10).null_space_dim(), 2);
    EXPECT_EQ(cyclic_spec(10).null_space_dim(), 1);
}

TEST(Penalty, RandomEffectIsIdentity) {
    BasisSpec re;
    re.kind = BasisKind::RandomEffect;
    re.k = 3;
    const PenaltyMatrix S = penalty_matrix(re, KnotVector{});
    EXPECT_EQ(S.S, Matrix::Identity(3, 3));
    EXPECT_EQ(S.null_space_dim, 0);
}

TEST(Penalty, CyclicConstantIsInTheNullSpace) {
    const auto x = range(0, 15);
    const BasisSpec spec = cyclic_spec(6);
    const PenaltyMatrix S = penalty_matrix(spec, place_knots(x, spec));
    EXPECT_LT((S.S * Vector::Ones(6)).cwiseAbs().maxCoeff(), 1e-9 * S.S.norm());
}

// ------------------------------------------------------------ constraints

TEST(CenterConstraint, ColumnSumsVanishAndDimensionDropsByOne) {
    std::mt19937_64 rng(6);
    const Vector x = support::uniform_vector(rng, 150, 0.0, 1.0);
    std::vector<double> xs(x.data(), x.data() + x.size());
    const BasisSpec spec = cubic_spec(5);
    const KnotVector kv = place_knots(xs, spec);
    const Matrix B = eval_basis(spec, kv, x);
    const CenteredBasis c = center_constraint(B, penalty_matrix(spec, kv));
    EXPECT_EQ(c.design.cols(), 4);
    EXPECT_EQ(c.transform.constraints, 1);
    EXPECT_LT(c.design.colwise().sum().cwiseAbs().maxCoeff(), 1e-10);
    const Matrix& Z = c.transform.Z;
    EXPECT_LT((Z.transpose() * Z - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(c.penalty);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
    EXPECT_EQ(count_null(c.penalty), 1);
}

TEST(CenterConstraint, ConstrainedDesignIsOrthogonalToIntercept) {
    std::mt19937_64 rng(7);
    Matrix B(40, 4);
    B.col(0).setOnes();
    B.rightCols(3) = support::uniform_matrix(rng, 40, 3, -1.0, 1.0);
    PenaltyMatrix S{Matrix::Identity(4, 4), 0};
    const CenteredBasis c = center_constraint(B, S);
    EXPECT_LT((Vector::Ones(40).transpose() * c.design).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CenterConstraint, RankDeficiencyIsIdentifiabilityError) {
    // only two distinct covariate values: a k=5 basis is not identifiable
    const std::vector<double> knots_from{0, 1, 2, 3, 4, 5, 6};
    const BasisSpec spec = cubic_spec(6);
    const KnotVector kv = place_knots(knots_from, spec);
    Vector x(20);
    for (int i = 0; i < 20; ++i) x(i) = i % 2 ? 6.0 : 0.0;
    const Matrix B = eval_basis(spec, kv, x);
    const std::string msg = support::error_message([&] { center_constraint(B, PenaltyMatrix{Matrix::Zero(6, 6), 6}, "s(x)"); });
    EXPECT_NE(msg.find("s(x)"), std::string::npos) << msg;
    EXPECT_EQ(error_kind([&] { center_constraint(B, PenaltyMatrix{Matrix::Zero(6, 6), 6}); }),
              ErrorKind::Identifiability);
}

// ------------------------------------------------------------ tensor

TEST(Tensor, SingleMarginIsUnchanged) {
    std::mt19937_64 rng(8);
    const Matrix A = support::uniform_matrix(rng, 7, 4, -1, 1);
    EXPECT_EQ(tensor_design({A}), A);
}

TEST(Tensor, TwoMarginsFirstVariesSlowest) {
    std::mt19937_64 rng(9);
    const Matrix A = support::uniform_matrix(rng, 6, 3, -1, 1);
    const Matrix B = support::uniform_matrix(rng, 6, 4, -1, 1);
    const Matrix T = tensor_design({A, B});
    ASSERT_EQ(T.cols(), 12);
    for (int i = 0; i < 6; ++i)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 4; ++b) EXPECT_EQ(T(i, 4 * a + b), A(i, a) * B(i, b));
}

TEST(Tensor, ThreeMarginsMatchExplicitLoop) {
    std::mt19937_64 rng(10);
    const Matrix A = support::uniform_matrix(rng, 5, 2, -1, 1);
    const Matrix B = support::uniform_matrix(rng, 5, 3, -1, 1);
    const Matrix C = support::uniform_matrix(rng, 5, 2, -1, 1);
    const Matrix T = tensor_design({A, B, C});
    ASSERT_EQ(T.cols(), 12);
    for (int i = 0; i < 5; ++i) {
        int col = 0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 2; ++c) EXPECT_NEAR(T(i, col++), A(i, a) * B(i, b) * C(i, c), 1e-15);
    }
}

TEST(Tensor, RowMismatchIsDimensionError) {
    EXPECT_EQ(error_kind([] { tensor_design({Matrix::Ones(3, 2), Matrix::Ones(4, 2)}); }), ErrorKind::Dimension);
}

TEST(Tensor, ZeroMarginPenaltyPropagates) {
    const auto S = tensor_penalties({Matrix::Zero(2, 2), Matrix::Identity(3, 3)});
    ASSERT_EQ(S.size(), 2u);
    EXPECT_TRUE(S[0].isZero(0.0));
    EXPECT_EQ(S[1].rows(), 6);
}

TEST(Tensor, QuadraticFormsEqualSliceSums) {
    std::mt19937_64 rng(11);
    const int K = 4, L = 5;
    Matrix Rx = support::uniform_matrix(rng, K, K, -1, 1), Ry = support::uniform_matrix(rng, L, L, -1, 1);
    const Matrix Sx = Rx.transpose() * Rx, Sy = Ry.transpose() * Ry;
    const auto S = tensor_penalties({Sx, Sy});
    for (int rep = 0; rep < 10; ++rep) {
        const Vector beta = support::normal_vector(rng, K * L);
        double sx = 0, sy = 0;
        // beta index k*L + l: slices over l for S_x, over k for S_y
        for (int l = 0; l < L; ++l) {
            Vector col(K);
            for (int k = 0; k < K; ++k) col(k) = beta(k * L + l);
            sx += col.dot(Sx * col);
        }
        for (int k = 0; k < K; ++k) {
            const Vector row = beta.segment(k * L, L);
            sy += row.dot(Sy * row);
        }
        EXPECT_NEAR(beta.dot(S[0] * beta), sx, 1e-12 * std::max(1.0, sx));
        EXPECT_NEAR(beta.dot(S[1] * beta), sy, 1e-12 * std::max(1.0, sy));
    }
}

TEST(Tensor, ThreeMarginPenaltiesUseIdentitiesElsewhere) {
    const Matrix S1 = (Matrix(2, 2) << 2, 1, 1, 2).finished();
    const Matrix S2 = Matrix::Identity(3, 3) * 5;
    const Matrix S3 = (Matrix(2, 2) << 1, -1, -1, 1).finished();
    const auto S = tensor_penalties({S1, S2, S3});
    ASSERT_EQ(S.size(), 3u);
    const Matrix I2 = Matrix::Identity(2, 2), I3 = Matrix::Identity(3, 3);
    EXPECT_EQ(S[0], kronecker(kronecker(S1, I3), I2));
    EXPECT_EQ(S[1], kronecker(kronecker(I2, S2), I2));
    EXPECT_EQ(S[2], kronecker(kronecker(I2, I3), S3));
}

TEST(Tensor, JointNullSpaceIsProductOfMarginNullities) {
    const auto x = range(0, 20);
    const BasisSpec spec = cubic_spec(5);
    const KnotVector kv = place_knots(x, spec);
    const Matrix S = penalty_matrix(spec, kv).S;
    const auto T = tensor_penalties({S, S});
    const Matrix sum = T[0] + T[1];
    EXPECT_EQ(count_null(sum), 4);
    EXPECT_EQ(tensor_null_space_dim({2, 2}), 4);
    EXPECT_EQ(tensor_null_space_dim({2, 1, 2}), 4);
    for (const auto& P : T) {
        const Eigen::SelfAdjointEigenSolver<Matrix> es(P);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff());
    }
}

TEST(Tensor, RescalingOneCovariateKeepsTheColumnSpace) {
    std::mt19937_64 rng(12);
    Dataset a, b;
    const Vector x = support::uniform_vector(rng, 120, 0, 1), z = support::uniform_vector(rng, 120, 0, 1);
    a.add_scalar("x", x);
    a.add_scalar("z", z);
    b.add_scalar("x", 37.0 * x);
    b.add_scalar("z", z);
    const auto sa = resolve(parse_formula("y ~ te(x, z)"), Schema({{"y"}, {"x"}, {"z"}})).terms.front();
    const Matrix Xa = build_plain_smooth(sa, a).X, Xb = build_plain_smooth(sa, b).X;
    const Matrix Q = Xa.householderQr().householderQ() * Matrix::Identity(Xa.rows(), Xa.cols());
    const Matrix resid = Xb - Q * (Q.transpose() * Xb);
    EXPECT_LT(resid.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Tensor, SwappingMarginsGivesTheSameFit) {
    std::mt19937_64 rng(13);
    Dataset d;
    const Vector x = support::uniform_vector(rng, 200, 0, 1), z = support::uniform_vector(rng, 200, 0, 1);
    d.add_scalar("x", x);
    d.add_scalar("z", z);
    d.add_scalar("y", (3 * x.array()).sin().matrix() + z.cwiseProduct(x) + 0.1 * support::normal_vector(rng, 200));
    FitOptions o1, o2;
    o1.log_lambda = (Vector(2) << 1.0, -2.0).finished();
    o2.log_lambda = (Vector(2) << -2.0, 1.0).finished();
    const FittedModel m1 = fit(d, "y ~ te(x, z, k=(5,6))", o1);
    const FittedModel m2 = fit(d, "y ~ te(z, x, k=(6,5))", o2);
    EXPECT_LT((m1.eta - m2.eta).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(m1.edf, m2.edf, 1e-8);
}
