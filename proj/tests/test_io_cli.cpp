#include <fstream>

#include <gtest/gtest.h>

#include "oracle/oracle.hpp"
#include "support.hpp"

using namespace lfgam;
using support::error_kind;
using support::error_message;
using support::run_cli;

namespace {

Schema temp_schema(int width) {
    return Schema({{"y", ColumnRole::Scalar, 1, {}, 0},
                   {"site", ColumnRole::Factor, 1, {}, 0},
                   {"Temp", ColumnRole::Matrix, width, {}, 0}});
}

std::string temp_csv(int n, int width) {
    std::string s = "y,site";
    for (int t = 0; t < width; ++t) s += ",Temp[" + std::to_string(t) + "]";
    s += "\n";
    static const char* sites[] = {"Dundee", "Edinburgh", "Newcastle"};
    for (int i = 0; i < n; ++i) {
        s += std::to_string(i * 0.5) + "," + sites[(i * 2) % 3];
        for (int t = 0; t < width; ++t) s += "," + std::to_string(10.0 + i + 0.1 * t);
        s += "\n";
    }
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const std::filesystem::path& p) { return json::parse(slurp(p)); }

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = support::scratch_dir(std::string(info->name()));
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::filesystem::path dir_;
};

} // namespace

// ------------------------------------------------------------ csv and ingest

TEST(Ingest, MatrixColumnFromBracketedHeaders) {
    const Dataset d = ingest_csv(temp_csv(4, 59), temp_schema(59));
    EXPECT_EQ(d.rows(), 4);
    const Matrix& T = d.column("Temp").matrix;
    ASSERT_EQ(T.cols(), 59);
    EXPECT_DOUBLE_EQ(T(2, 58), 12.0 + 5.8);
    EXPECT_DOUBLE_EQ(T(0, 0), 10.0);
}

TEST(Ingest, RaggedMatrixHeadersAreRejected) {
    const auto msg = error_message([] { ingest_csv(temp_csv(4, 58), temp_schema(59)); });
    EXPECT_EQ(error_kind([] { ingest_csv(temp_csv(4, 58), temp_schema(59)); }), ErrorKind::Input);
    EXPECT_NE(msg.find("ragged"), std::string::npos);
    EXPECT_NE(msg.find("Temp"), std::string::npos);
    EXPECT_EQ(error_kind([] { ingest_csv(temp_csv(4, 60), temp_schema(59)); }), ErrorKind::Input);
}

TEST(Ingest, FactorLevelsFollowFirstAppearance) {
    const Dataset d = ingest_csv(temp_csv(6, 2), temp_schema(2));
    const auto& c = d.column("site");
    EXPECT_EQ(c.levels, (std::vector<std::string>{"Dundee", "Newcastle", "Edinburgh"}));
    EXPECT_EQ(c.codes, (std::vector<int>{0, 1, 2, 0, 1, 2}));
    const auto ast = parse_formula("y ~ s(site, bs=re)");
    EXPECT_EQ(resolve(ast, d.schema()).terms.front().cls, TermClass::RandomEffect);
}

TEST(Ingest, UnparseableCellNamesRowAndColumn) {
    const std::string csv = "y,x\n1,2\n3,abc\n";
    const Schema s({{"y", ColumnRole::Scalar, 1, {}, 0}, {"x", ColumnRole::Scalar, 1, {}, 0}});
    const auto msg = error_message([&] { ingest_csv(csv, s); });
    EXPECT_NE(msg.find("row 2"), std::string::npos);
    EXPECT_NE(msg.find("'x'"), std::string::npos);
    EXPECT_EQ(error_kind([&] { ingest_csv("y,x\n1,1e999\n", s); }), ErrorKind::Input);
    EXPECT_EQ(error_kind([&] { ingest_csv("y,x\n1,2 \n", s); }), ErrorKind::Input);
}

TEST(Ingest, MissingValuesOnlyInScalarColumns) {
    const Schema s({{"y", ColumnRole::Scalar, 1, {}, 0}, {"g", ColumnRole::Factor, 1, {}, 0},
                    {"M", ColumnRole::Matrix, 2, {}, 0}});
    const Dataset d = ingest_csv("y,g,M[0],M[1]\nNA,a,1,2\n,b,3,4\n5,a,5,6\n", s);
    EXPECT_TRUE(std::isnan(d.column("y").values(0)));
    EXPECT_TRUE(std::isnan(d.column("y").values(1)));
    EXPECT_EQ(error_kind([&] { ingest_csv("y,g,M[0],M[1]\n1,a,NA,2\n", s); }), ErrorKind::Input);
    EXPECT_EQ(error_kind([&] { ingest_csv("y,g,M[0],M[1]\n1,,1,2\n", s); }), ErrorKind::Input);
}

TEST(Ingest, HeaderSchemaMismatchAndEmptyFile) {
    const Schema s({{"y", ColumnRole::Scalar, 1, {}, 0}, {"x", ColumnRole::Scalar, 1, {}, 0}});
    EXPECT_EQ(error_kind([&] { ingest_csv("y\n1\n", s); }), ErrorKind::Input);
    EXPECT_NE(error_message([&] { ingest_csv("y,x,z\n1,2,3\n", s); }).find("'z'"), std::string::npos);
    EXPECT_EQ(error_kind([&] { ingest_csv("", s); }), ErrorKind::Input);
    EXPECT_EQ(error_kind([&] { ingest_csv("y,x\n", s); }), ErrorKind::Input);
    EXPECT_NE(error_message([&] { ingest_csv("y,x\n1,2\n3\n", s); }).find("row 2"), std::string::npos);
}

TEST(Csv, QuotedFieldsFollowRfc4180) {
    const CsvTable t = parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"line\nbreak\",,x\n");
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0], (std::vector<std::string>{"a", "b,c", "say \"hi\""}));
    EXPECT_EQ(t[1], (std::vector<std::string>{"line\nbreak", "", "x"}));
    EXPECT_EQ(parse_csv(write_csv(t)), t);
    EXPECT_EQ(error_kind([] { parse_csv("a,\"b\n"); }), ErrorKind::Input);
    EXPECT_EQ(error_kind([] { parse_csv("a,b\"c\n"); }), ErrorKind::Input);
}

TEST(Csv, NumbersRoundTripExactly) {
    std::mt19937_64 rng(1);
    const Vector v = support::normal_vector(rng, 200, 1e3);
    for (double x : v) EXPECT_EQ(std::stod(format_double(x)), x);
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "");
}

TEST(Schema, JsonRoundTripAndValidation) {
    const Schema s({{"y", ColumnRole::Scalar, 1, {}, 0},
                    {"b", ColumnRole::Binary, 1, {}, 0},
                    {"M", ColumnRole::Matrix, 3, {0.0, 0.5, 1.0}, 0}});
    const json j = schema_to_json(s);
    EXPECT_EQ(j.at("format_version"), 1);
    EXPECT_EQ(schema_hash(schema_from_json(j)), schema_hash(s));
    json bad = j;
    bad["format_version"] = 2;
    EXPECT_EQ(error_kind([&] { schema_from_json(bad); }), ErrorKind::Input);
    bad = j;
    bad["columns"][2]["index_values"] = {0.0, 1.0};
    EXPECT_EQ(error_kind([&] { schema_from_json(bad); }), ErrorKind::Input);
    bad = j;
    bad["columns"][2]["width"] = 0;
    EXPECT_EQ(error_kind([&] { schema_from_json(bad); }), ErrorKind::Input);
}

TEST(Schema, HashGuardRefusesChangedSchema) {
    Dataset d;
    std::mt19937_64 rng(2);
    d.add_scalar("y", support::normal_vector(rng, 60));
    d.add_scalar("x", support::uniform_vector(rng, 60, 0, 1));
    const FittedModel m = fit(d, "y ~ s(x)");
    EXPECT_NO_THROW(require_schema(m, d.schema()));
    Dataset e = d;
    e.add_scalar("extra", Vector::Zero(60));
    const auto msg = error_message([&] { require_schema(m, e.schema()); });
    EXPECT_NE(msg.find("schema hash"), std::string::npos);
    json j = model_to_json(m);
    j["schema_hash"] = "0000000000000000";
    EXPECT_EQ(error_kind([&] { model_from_json(j); }), ErrorKind::Input);
}

// ------------------------------------------------------------ model files

TEST(ModelFile, RoundTripReproducesPredictions) {
    for (SimKind k : {SimKind::Vcm, SimKind::Sofr, SimKind::Dlm}) {
        SimulationOptions o;
        o.kind = k;
        o.n = 120;
        o.T = 12;
        const Simulation s = simulate(o);
        const FittedModel m = fit(s.data, s.formula);
        const FittedModel r = model_from_json(json::parse(model_to_json(m).dump()));
        const Prediction p = predict(r, s.data, PredictScale::Terms);
        EXPECT_LT((p.fit - m.eta).cwiseAbs().maxCoeff(), 1e-10) << s.formula;
        EXPECT_LT((p.se - predict(m, s.data).se).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_EQ(r.Vb, m.Vb);
        EXPECT_EQ(model_to_json(r).dump(), model_to_json(m).dump());
    }
}

TEST(ModelFile, LinearToyRoundTrip) {
    Dataset d;
    d.add_scalar("y", (Vector(5) << 1.0, 2.5, 2.9, 4.2, 5.1).finished());
    d.add_scalar("x", (Vector(5) << 0, 1, 2, 3, 4).finished());
    const FittedModel m = fit(d, "y ~ x");
    const FittedModel r = model_from_json(json::parse(model_to_json(m).dump(1)));
    EXPECT_LT((predict(r, d).fit - m.eta).cwiseAbs().maxCoeff(), 1e-10);
    json bad = model_to_json(m);
    bad.erase("beta");
    EXPECT_EQ(error_kind([&] { model_from_json(bad); }), ErrorKind::Input);
}

// ------------------------------------------------------------ simulate

TEST(Simulate, VcmTruthTabulatesSineOnHundredPoints) {
    SimulationOptions o;
    o.kind = SimKind::Vcm;
    o.n = 500;
    const Simulation s = simulate(o);
    const auto& g = s.truth.at("grid");
    const auto& t = s.truth.at("truth");
    ASSERT_EQ(g.size(), 100u);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(t[i].get<double>(), std::sin(g[i].get<double>()));
    EXPECT_EQ(s.truth.at("format_version"), 1);
}

TEST(Simulate, SofrColumnsAreIndexed) {
    SimulationOptions o;
    o.kind = SimKind::Sofr;
    o.n = 40;
    o.T = 50;
    const std::string csv = dataset_to_csv(simulate(o).data);
    const std::string header = csv.substr(0, csv.find('\n'));
    EXPECT_NE(header.find("V[0]"), std::string::npos);
    EXPECT_NE(header.find("V[49],X[0]"), std::string::npos);
    EXPECT_NE(header.find("X[49]"), std::string::npos);
    EXPECT_EQ(header.find("V[50]"), std::string::npos);
}

TEST(Simulate, DlmResponsesMatchTruthWithinNoise) {
    SimulationOptions o;
    o.kind = SimKind::Dlm;
    o.n = 400;
    o.T = 30;
    o.seed = 5;
    const Simulation s = simulate(o);
    // re-score from the data alone with the tabulated surface formula
    const Matrix& Temp = s.data.column("Temp").matrix;
    const Matrix& Lag = s.data.column("Lag").matrix;
    const Vector& y = s.data.column("y").values;
    Vector resid(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double c = 0;
        for (int t = 0; t < 30; ++t) c += Temp(i, t) * std::exp(-Lag(i, t) / 10.0);
        resid(i) = y(i) - s.truth.at("intercept").get<double>() - c;
    }
    const double sd = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
    const double sigma = s.truth.at("sigma").get<double>();
    EXPECT_NEAR(sd, sigma, 4.0 * sigma / std::sqrt(2.0 * 400));
    EXPECT_LT(std::abs(resid.mean()), 4.0 * sigma / std::sqrt(400.0));
    // the overlapping windows share one series
    for (Eigen::Index i = 1; i < Temp.rows(); ++i) EXPECT_EQ(Temp(i, 1), Temp(i - 1, 0));
}

TEST(Simulate, DeterministicAndValidated) {
    SimulationOptions o;
    o.kind = SimKind::Sofr;
    o.n = 30;
    o.T = 8;
    EXPECT_EQ(dataset_to_csv(simulate(o).data), dataset_to_csv(simulate(o).data));
    o.T = 1;
    EXPECT_EQ(error_kind([&] { simulate(o); }), ErrorKind::Validation);
    o.T = 8;
    o.n = 1;
    EXPECT_EQ(error_kind([&] { simulate(o); }), ErrorKind::Validation);
    EXPECT_EQ(error_kind([] { sim_kind_from_string("ar1"); }), ErrorKind::Input);
}

// ------------------------------------------------------------ command line

TEST_F(CliTest, DlmFitWritesEdfFields) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "dlm", "--n", "150", "--T", "12", "--seed", "3", "--out", path("d")}).code, 0);
    const auto r = run_cli({"fit", "--data", path("d.csv"), "--schema", path("d.schema.json"), "--formula",
                            "y ~ te(Temp, Lag, k=(5,5))", "--out", path("m.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = read_json(path("m.json"));
    EXPECT_EQ(m.at("format_version"), 1);
    EXPECT_TRUE(m.at("edf").is_number());
    ASSERT_EQ(m.at("terms").size(), 2u);
    EXPECT_TRUE(m.at("terms")[1].at("edf").is_number());
    EXPECT_EQ(1 + m.at("terms")[1].at("cols").get<std::size_t>(), m.at("beta").size());
    for (const char* key : {"formula", "schema_hash", "beta", "log_lambda", "phi", "kappa", "Vb", "lambda_trace"})
        EXPECT_TRUE(m.contains(key)) << key;
    EXPECT_TRUE(m.at("terms")[1].contains("knots"));
    EXPECT_TRUE(m.at("terms")[1].contains("constraint"));
    EXPECT_NE(r.out.find("edf"), std::string::npos);
}

TEST_F(CliTest, MalformedFormulaExitsThreeWithPosition) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "vcm", "--n", "50", "--out", path("d")}).code, 0);
    const auto r = run_cli({"fit", "--data", path("d.csv"), "--schema", path("d.schema.json"), "--formula",
                            "y ~ s(z, by=)", "--out", path("m.json")});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("12"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("parse"), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(path("m.json")));
}

TEST_F(CliTest, ExitCodesByFailureKind) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "vcm", "--n", "50", "--out", path("d")}).code, 0);
    const std::string csv = path("d.csv"), schema = path("d.schema.json");
    // unidentifiable model: fit failure
    EXPECT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--formula", "y ~ s(z, center=false)", "--out",
                       path("m.json")})
                  .code,
              2);
    // unknown column, unknown family, missing file, missing flag: input errors
    EXPECT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--formula", "y ~ s(w)", "--out", path("m.json")}).code, 3);
    EXPECT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--formula", "y ~ x", "--family", "gamma", "--out",
                       path("m.json")})
                  .code,
              3);
    EXPECT_EQ(run_cli({"fit", "--data", path("nope.csv"), "--schema", schema, "--formula", "y ~ x", "--out",
                       path("m.json")})
                  .code,
              3);
    EXPECT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--out", path("m.json")}).code, 3);
    EXPECT_EQ(run_cli({"frobnicate"}).code, 3);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
    EXPECT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--formula", "y ~ x", "--kappa", "0.5", "--out",
                       path("m.json")})
                  .code,
              3);
}

TEST_F(CliTest, PredictRoundTripAndSchemaGuard) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "vcm", "--n", "80", "--out", path("d")}).code, 0);
    ASSERT_EQ(run_cli({"fit", "--data", path("d.csv"), "--schema", path("d.schema.json"), "--formula", "y ~ x",
                       "--out", path("m.json")})
                  .code,
              0);
    const Dataset d = ingest(path("d.csv"), path("d.schema.json"));
    const FittedModel direct = fit(d, "y ~ x");
    const auto r = run_cli({"predict", "--model", path("m.json"), "--data", path("d.csv"), "--schema",
                            path("d.schema.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const CsvTable t = parse_csv(r.out);
    ASSERT_EQ(t.size(), 81u);
    EXPECT_EQ(t[0], (std::vector<std::string>{"row", "term", "estimate", "se", "scale"}));
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_NEAR(std::stod(t[i][2]), direct.eta(static_cast<Eigen::Index>(i - 1)), 1e-10);

    json s = read_json(path("d.schema.json"));
    std::swap(s["columns"][1], s["columns"][2]);
    write_file(path("e.schema.json"), s.dump());
    const auto bad = run_cli({"predict", "--model", path("m.json"), "--data", path("d.csv"), "--schema",
                              path("e.schema.json")});
    EXPECT_EQ(bad.code, 3);
    EXPECT_NE(bad.err.find("schema hash"), std::string::npos);
}

TEST_F(CliTest, CumulativePanelMatchesTermsPrediction) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "sofr", "--n", "100", "--T", "15", "--seed", "4", "--out", path("d")}).code, 0);
    const std::string csv = path("d.csv"), schema = path("d.schema.json");
    ASSERT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--formula", "y ~ s(V, by=X)", "--out", path("m.json")}).code, 0);
    const auto terms = run_cli({"terms", "--model", path("m.json"), "--data", csv, "--schema", schema, "--rows", "0",
                                "--rows", "7", "--draws", "100"});
    ASSERT_EQ(terms.code, 0) << terms.err;
    const auto pred = run_cli({"predict", "--model", path("m.json"), "--data", csv, "--schema", schema, "--scale", "terms"});
    ASSERT_EQ(pred.code, 0) << pred.err;
    std::map<std::string, double> last;  // row -> final cumulative value
    std::set<std::string> panels;
    for (const auto& r : parse_csv(terms.out)) {
        if (r[0] == "term") continue;
        panels.insert(r[1]);
        if (r[1] == "cumulative") last[r[2]] = std::stod(r[5]);
    }
    EXPECT_EQ(panels, (std::set<std::string>{"data", "smooth", "product", "cumulative"}));
    ASSERT_EQ(last.size(), 2u);
    int matched = 0;
    for (const auto& r : parse_csv(pred.out)) {
        if (r[1] != "s(V):X" || !last.count(r[0])) continue;
        EXPECT_NEAR(std::stod(r[2]), last[r[0]], 1e-10);
        ++matched;
    }
    EXPECT_EQ(matched, 2);
}

TEST_F(CliTest, VaryingCoefficientExportsBothViews) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "vcm", "--n", "150", "--out", path("d")}).code, 0);
    const std::string csv = path("d.csv"), schema = path("d.schema.json");
    ASSERT_EQ(run_cli({"fit", "--data", csv, "--schema", schema, "--formula", "y ~ s(z, by=x)", "--out", path("m.json")}).code, 0);
    const auto r = run_cli({"terms", "--model", path("m.json"), "--data", csv, "--schema", schema, "--grid", "50"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::map<std::string, int> counts;
    for (const auto& row : parse_csv(r.out))
        if (row[0] == "s(z):x") ++counts[row[1]];
    EXPECT_EQ(counts["smooth"], 50);
    EXPECT_EQ(counts["product"], 150);
    EXPECT_EQ(counts["data"], 150);
    const auto nodata = run_cli({"terms", "--model", path("m.json"), "--data", csv});
    EXPECT_EQ(nodata.code, 3);
}

TEST_F(CliTest, SeededOutputsAreByteIdentical) {
    ASSERT_EQ(run_cli({"simulate", "--kind", "vcm", "--n", "80", "--seed", "9", "--out", path("a")}).code, 0);
    ASSERT_EQ(run_cli({"simulate", "--kind", "vcm", "--n", "80", "--seed", "9", "--out", path("b")}).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_EQ(slurp(path("a.truth.json")), slurp(path("b.truth.json")));
    for (const char* out : {"m1.json", "m2.json"})
        ASSERT_EQ(run_cli({"fit", "--data", path("a.csv"), "--schema", path("a.schema.json"), "--formula",
                           "y ~ s(z, by=x)", "--seed", "4", "--out", path(out)})
                      .code,
                  0);
    EXPECT_EQ(slurp(path("m1.json")), slurp(path("m2.json")));
    EXPECT_EQ(read_json(path("m1.json")).at("seed"), 4);
    for (const char* out : {"s1.csv", "s2.csv"})
        ASSERT_EQ(run_cli({"sample", "--model", path("m1.json"), "--n", "25", "--seed", "11", "--out", path(out)}).code, 0);
    const std::string s1 = slurp(path("s1.csv"));
    EXPECT_EQ(s1, slurp(path("s2.csv")));
    const CsvTable t = parse_csv(s1);
    EXPECT_EQ(t[0], (std::vector<std::string>{"draw", "coef", "value"}));
    const auto p = read_json(path("m1.json")).at("beta").size();
    EXPECT_EQ(t.size(), 1 + 25 * p);
    ASSERT_EQ(run_cli({"sample", "--model", path("m1.json"), "--n", "25", "--seed", "12", "--out", path("s3.csv")}).code, 0);
    EXPECT_NE(s1, slurp(path("s3.csv")));
}

TEST_F(CliTest, SimulateWritesVersionedFiles) {
    const auto r = run_cli({"simulate", "--kind", "sofr", "--n", "30", "--T", "50", "--out", path("s")});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("s(V, by=X)"), std::string::npos);
    EXPECT_EQ(read_json(path("s.truth.json")).at("format_version"), 1);
    EXPECT_EQ(read_json(path("s.schema.json")).at("format_version"), 1);
    const Dataset d = ingest(path("s.csv"), path("s.schema.json"));
    EXPECT_EQ(d.column("V").matrix.cols(), 50);
    EXPECT_EQ(d.column("X").matrix.cols(), 50);
    EXPECT_EQ(run_cli({"simulate", "--kind", "ar1", "--out", path("t")}).code, 3);
}

// ------------------------------------------------------------ oracle self-checks

TEST(Oracle, OrthonormalDesignGivesProjection) {
    std::mt19937_64 rng(6);
    const Matrix A = support::uniform_matrix(rng, 30, 4, -1, 1);
    const Matrix Q = Eigen::HouseholderQR<Matrix>(A).householderQ() * Matrix::Identity(30, 4);
    const Vector y = support::normal_vector(rng, 30);
    const auto r = oracle::ols_reference(Q, y);
    EXPECT_FALSE(r.rank_deficient);
    EXPECT_LT((r.beta - Q.transpose() * y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Oracle, RankDeficientDesignGivesMinimumNorm) {
    std::mt19937_64 rng(7);
    Matrix X(20, 3);
    X.col(0) = support::normal_vector(rng, 20);
    X.col(1) = support::normal_vector(rng, 20);
    X.col(2) = X.col(0) + X.col(1);
    const Vector y = support::normal_vector(rng, 20);
    const auto r = oracle::ols_reference(X, y);
    EXPECT_TRUE(r.rank_deficient);
    // minimum norm: orthogonal to the null direction (1, 1, -1)
    EXPECT_NEAR(r.beta.dot(Vector::Ones(3) - 2.0 * Vector::Unit(3, 2)), 0.0, 1e-10);
    // and still a least-squares solution
    EXPECT_LT((X.transpose() * (y - X * r.beta)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Oracle, GaussianMaximizerAgreesWithLeastSquares) {
    std::mt19937_64 rng(8);
    Matrix X(25, 3);
    X.col(0).setOnes();
    X.col(1) = support::normal_vector(rng, 25);
    X.col(2) = support::normal_vector(rng, 25);
    const Vector y = X * Vector(Eigen::Vector3d(0.5, -1.0, 2.0)) + support::normal_vector(rng, 25, 0.2);
    const Vector ml = oracle::generic_glm_maximizer(X, y, oracle::GlmFamily::Gaussian);
    EXPECT_LT((ml - oracle::ols_reference(X, y).beta).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Oracle, CoxDeBoorPartitionOfUnity) {
    const std::vector<double> t{0, 0, 0, 0, 0.3, 0.5, 1, 1, 1, 1};
    for (double x : {0.0, 0.1, 0.3, 0.77, 1.0}) {
        double s = 0;
        for (int j = 0; j < oracle::cubic_dim(t); ++j) s += oracle::cubic(t, j, x);
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}
