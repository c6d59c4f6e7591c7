#pragma once

// Files: RFC-4180 CSV, JSON schema / model / truth documents, and the
// synthetic data generators.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfgam/inference.hpp"

namespace lfgam {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------- CSV

using CsvTable = std::vector<std::vector<std::string>>;

/// Parses RFC-4180 text: comma separated, double-quoted fields with ""
/// escapes, CRLF or LF line ends. A trailing line break does not start a row.
inline CsvTable parse_csv(std::string_view text) {
    CsvTable rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started || !field.empty())
                throw Error(ErrorKind::Input, "CSV line " + std::to_string(line) + ": quote inside an unquoted field");
            quoted = true;
            field_started = true;
            break;
        case ',': end_field(); break;
        case '\r':
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
            [[fallthrough]];
        case '\n':
            end_row();
            ++line;
            break;
        default: field += c; field_started = true;
        }
    }
    if (quoted) throw Error(ErrorKind::Input, "CSV ends inside a quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Shortest decimal text that reads back to the same double; empty for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline std::string write_csv(const CsvTable& rows) {
    std::string out;
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out += ',';
            out += csv_escape(r[j]);
        }
        out += '\n';
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Input, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Input, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(ErrorKind::Input, "failed writing '" + path + "'");
}

// ---------------------------------------------------------------- schema

inline json schema_to_json(const Schema& s) {
    json cols = json::array();
    for (const auto& c : s.columns()) {
        json j{{"name", c.name}, {"role", to_string(c.role)}};
        if (c.role == ColumnRole::Matrix) {
            j["width"] = c.width;
            if (!c.index_values.empty()) j["index_values"] = c.index_values;
        }
        cols.push_back(std::move(j));
    }
    return json{{"format_version", kFormatVersion}, {"columns", std::move(cols)}};
}

inline void check_format_version(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("format_version"))
        throw Error(ErrorKind::Input, what + " has no format_version field");
    if (j.at("format_version") != kFormatVersion)
        throw Error(ErrorKind::Input, what + " has format_version " + j.at("format_version").dump() +
                                          ", expected " + std::to_string(kFormatVersion));
}

inline Schema schema_from_json(const json& j) {
    try {
        check_format_version(j, "schema");
        std::vector<ColumnSchema> cols;
        for (const auto& c : j.at("columns")) {
            ColumnSchema cs;
            cs.name = c.at("name").get<std::string>();
            cs.role = column_role_from_string(c.at("role").get<std::string>());
            if (cs.role == ColumnRole::Matrix) {
                cs.width = c.at("width").get<int>();
                if (cs.width < 1) throw Error(ErrorKind::Input, "matrix column '" + cs.name + "' needs width >= 1");
                if (c.contains("index_values")) {
                    cs.index_values = c.at("index_values").get<std::vector<double>>();
                    if (static_cast<int>(cs.index_values.size()) != cs.width)
                        throw Error(ErrorKind::Input, "index_values of '" + cs.name + "' has " +
                                                          std::to_string(cs.index_values.size()) +
                                                          " entries, width is " + std::to_string(cs.width));
                }
            }
            cols.push_back(std::move(cs));
        }
        return Schema(std::move(cols));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, std::string("malformed schema: ") + e.what());
    }
}

/// 64-bit FNV-1a of the canonical schema text.
inline std::string schema_hash(const Schema& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : schema_to_json(s).dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------- ingest

namespace detail {

inline double parse_number(const std::string& cell, std::size_t row, const std::string& col, bool allow_missing) {
    if (cell.empty() || cell == "NA") {
        if (allow_missing) return std::numeric_limits<double>::quiet_NaN();
        throw Error(ErrorKind::Input, "missing value at row " + std::to_string(row) + ", column '" + col +
                                          "' (missing values are allowed only in scalar columns)");
    }
    double v = 0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    if (*b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v))
        throw Error(ErrorKind::Input,
                    "unparseable value '" + cell + "' at row " + std::to_string(row) + ", column '" + col + "'");
    return v;
}

inline std::string matrix_header(const std::string& name, int t) { return name + "[" + std::to_string(t) + "]"; }

} // namespace detail

/// Reads CSV text against a schema. Rows are numbered from 1 after the header.
inline Dataset ingest_csv(std::string_view text, const Schema& schema) {
    const CsvTable table = parse_csv(text);
    if (table.empty() || (table.size() == 1 && table[0].size() == 1 && table[0][0].empty()))
        throw Error(ErrorKind::Input, "CSV file is empty");
    const auto& header = table.front();
    std::map<std::string, std::size_t> pos;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (!pos.emplace(header[j], j).second)
            throw Error(ErrorKind::Input, "duplicate CSV header '" + header[j] + "'");

    std::size_t consumed = 0;
    for (const auto& c : schema.columns()) {
        if (c.role != ColumnRole::Matrix) {
            if (!pos.count(c.name))
                throw Error(ErrorKind::Input, "schema column '" + c.name + "' is missing from the CSV header");
            ++consumed;
            continue;
        }
        int found = 0;
        while (pos.count(detail::matrix_header(c.name, found))) ++found;
        if (found != c.width || pos.count(detail::matrix_header(c.name, c.width)))
            throw Error(ErrorKind::Input, "ragged matrix column '" + c.name + "': schema width " +
                                              std::to_string(c.width) + ", CSV has " + std::to_string(found) +
                                              " headers " + c.name + "[0].." + c.name + "[" +
                                              std::to_string(std::max(found - 1, 0)) + "]");
        const std::size_t first = pos.at(detail::matrix_header(c.name, 0));
        for (int t = 1; t < c.width; ++t)
            if (pos.at(detail::matrix_header(c.name, t)) != first + static_cast<std::size_t>(t))
                throw Error(ErrorKind::Input, "matrix column '" + c.name + "' headers are not contiguous");
        consumed += static_cast<std::size_t>(c.width);
    }
    if (consumed != header.size()) {
        for (const auto& h : header) {
            const auto br = h.find('[');
            const std::string base = br == std::string::npos ? h : h.substr(0, br);
            if (!schema.find(base) || (br == std::string::npos) != (schema.at(base).role != ColumnRole::Matrix))
                throw Error(ErrorKind::Input, "CSV column '" + h + "' is not declared in the schema");
        }
        throw Error(ErrorKind::Input, "CSV header does not match the schema");
    }

    const std::size_t n = table.size() - 1;
    for (std::size_t r = 1; r < table.size(); ++r)
        if (table[r].size() != header.size())
            throw Error(ErrorKind::Input, "row " + std::to_string(r) + " has " + std::to_string(table[r].size()) +
                                              " fields, header has " + std::to_string(header.size()));
    if (n == 0) throw Error(ErrorKind::Input, "CSV file has a header but no data rows");

    Dataset d;
    for (const auto& c : schema.columns()) {
        switch (c.role) {
        case ColumnRole::Scalar:
        case ColumnRole::Binary: {
            Vector v(static_cast<Eigen::Index>(n));
            const std::size_t j = pos.at(c.name);
            for (std::size_t r = 0; r < n; ++r)
                v(static_cast<Eigen::Index>(r)) = detail::parse_number(table[r + 1][j], r + 1, c.name, true);
            if (c.role == ColumnRole::Scalar)
                d.add_scalar(c.name, std::move(v));
            else
                d.add_binary(c.name, std::move(v));
            break;
        }
        case ColumnRole::Factor: {
            std::vector<std::string> labels;
            const std::size_t j = pos.at(c.name);
            for (std::size_t r = 0; r < n; ++r) {
                if (table[r + 1][j].empty())
                    throw Error(ErrorKind::Input, "missing value at row " + std::to_string(r + 1) + ", column '" +
                                                      c.name + "' (missing values are allowed only in scalar columns)");
                labels.push_back(table[r + 1][j]);
            }
            d.add_factor(c.name, labels);
            break;
        }
        case ColumnRole::Matrix: {
            Matrix M(static_cast<Eigen::Index>(n), c.width);
            const std::size_t j0 = pos.at(detail::matrix_header(c.name, 0));
            for (std::size_t r = 0; r < n; ++r)
                for (int t = 0; t < c.width; ++t)
                    M(static_cast<Eigen::Index>(r), t) = detail::parse_number(
                        table[r + 1][j0 + static_cast<std::size_t>(t)], r + 1, detail::matrix_header(c.name, t), false);
            d.add_matrix(c.name, std::move(M), c.index_values);
            break;
        }
        }
    }
    return d;
}

inline Dataset ingest(const std::string& csv_path, const std::string& schema_path) {
    json sj;
    try {
        sj = json::parse(read_file(schema_path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, "schema '" + schema_path + "' is not valid JSON: " + e.what());
    }
    return ingest_csv(read_file(csv_path), schema_from_json(sj));
}

/// Wide CSV text of a dataset (matrix columns as name[t] headers).
inline std::string dataset_to_csv(const Dataset& d) {
    CsvTable t(static_cast<std::size_t>(d.rows()) + 1);
    for (const auto& c : d.columns()) {
        if (c.meta.role == ColumnRole::Matrix) {
            for (int k = 0; k < c.meta.width; ++k) {
                t[0].push_back(detail::matrix_header(c.meta.name, k));
                for (Eigen::Index i = 0; i < d.rows(); ++i)
                    t[static_cast<std::size_t>(i) + 1].push_back(format_double(c.matrix(i, k)));
            }
            continue;
        }
        t[0].push_back(c.meta.name);
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            auto& row = t[static_cast<std::size_t>(i) + 1];
            if (c.meta.role == ColumnRole::Factor)
                row.push_back(c.levels[static_cast<std::size_t>(c.codes[static_cast<std::size_t>(i)])]);
            else
                row.push_back(std::isnan(c.values(i)) ? "NA" : format_double(c.values(i)));
        }
    }
    return write_csv(t);
}

// ---------------------------------------------------------------- model file

namespace detail {

inline json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(M.cols()));
        for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
        rows.push_back(r);
    }
    return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const json& j) {
    Matrix M(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != M.rows())
        throw Error(ErrorKind::Input, "matrix row count does not match its data");
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        const auto r = data.at(static_cast<std::size_t>(i)).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(r.size()) != M.cols())
            throw Error(ErrorKind::Input, "matrix column count does not match its data");
        for (Eigen::Index k = 0; k < M.cols(); ++k) M(i, k) = r[static_cast<std::size_t>(k)];
    }
    return M;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class E>
E enum_from_string(const std::string& s, std::initializer_list<E> all) {
    for (E e : all)
        if (s == to_string(e)) return e;
    throw Error(ErrorKind::Input, "unknown enumeration value '" + s + "' in model file");
}

inline json spec_to_json(const TermSpec& s) {
    json margins = json::array();
    for (const auto& m : s.margins)
        margins.push_back({{"kind", to_string(m.kind)},
                           {"k", m.k},
                           {"penalty_order", m.penalty_order},
                           {"knot_rule", to_string(m.knot_rule)}});
    return {{"kind", to_string(s.kind)}, {"class", to_string(s.cls)},  {"vars", s.vars},
            {"margins", margins},        {"by", to_string(s.by)},      {"by_var", s.by_var},
            {"center", s.center},        {"summed", s.summed},         {"column_weights", s.column_weights}};
}

inline TermSpec spec_from_json(const json& j) {
    TermSpec s;
    s.kind = enum_from_string(j.at("kind").get<std::string>(), {TermKind::Intercept, TermKind::Linear,
                                                               TermKind::Offset, TermKind::Smooth, TermKind::Tensor});
    s.cls = enum_from_string(j.at("class").get<std::string>(),
                             {TermClass::Intercept, TermClass::Linear, TermClass::LinearFactor, TermClass::PlainSmooth,
                              TermClass::RandomEffect, TermClass::PlainTensor, TermClass::VaryingCoefficient,
                              TermClass::FactorBy, TermClass::Sofr, TermClass::Dlm, TermClass::SummedSmooth});
    s.vars = j.at("vars").get<std::vector<std::string>>();
    for (const auto& m : j.at("margins")) {
        BasisSpec b;
        b.kind = enum_from_string(m.at("kind").get<std::string>(),
                                  {BasisKind::CubicBSpline, BasisKind::CyclicCubic, BasisKind::RandomEffect});
        b.k = m.at("k").get<int>();
        b.penalty_order = m.at("penalty_order").get<int>();
        b.knot_rule = enum_from_string(m.at("knot_rule").get<std::string>(), {KnotRule::Quantile, KnotRule::Uniform});
        s.margins.push_back(b);
    }
    s.by = enum_from_string(j.at("by").get<std::string>(),
                            {ByKind::None, ByKind::Numeric, ByKind::Binary, ByKind::Factor, ByKind::Matrix});
    s.by_var = j.at("by_var").get<std::string>();
    s.center = j.at("center").get<bool>();
    s.summed = j.at("summed").get<bool>();
    s.column_weights = j.at("column_weights").get<std::vector<double>>();
    return s;
}

} // namespace detail

inline json model_to_json(const FittedModel& m) {
    json terms = json::array();
    for (std::size_t i = 0; i < m.terms.size(); ++i) {
        const auto& t = m.terms[i];
        const auto& r = m.recipes[i];
        json knots = json::array();
        for (const auto& kv : r.knots) knots.push_back(kv.knots);
        json lags = json::array();
        for (const auto& l : r.lag_ranges) lags.push_back({l.lag, l.lower, l.upper});
        terms.push_back({{"label", t.label},
                         {"offset", t.offset},
                         {"cols", t.cols},
                         {"edf", t.edf},
                         {"null_space_dim", t.null_space_dim},
                         {"slots", t.slots},
                         {"spec", detail::spec_to_json(r.spec)},
                         {"knots", knots},
                         {"constraint", {{"Z", detail::matrix_to_json(r.constraint.Z)},
                                         {"constraints", r.constraint.constraints}}},
                         {"levels", r.levels},
                         {"lag_ranges", lags}});
    }
    json pens = json::array();
    for (const auto& e : m.penalties)
        pens.push_back({{"slot", e.slot}, {"block", e.block}, {"offset", e.offset}, {"S", detail::matrix_to_json(e.S)}});
    json trace = json::array();
    for (const auto& tp : m.lambda_trace)
        trace.push_back({{"log_lambda", detail::vector_to_json(tp.log_lambda)}, {"score", tp.score}});
    json ktrace = json::array();
    for (const auto& [lk, a] : m.kappa_trace) ktrace.push_back({lk, std::isfinite(a) ? json(a) : json(nullptr)});

    json j;
    j["format_version"] = kFormatVersion;
    j["formula"] = m.formula;
    j["response"] = m.response;
    j["offset"] = m.offset_var ? json(*m.offset_var) : json(nullptr);
    j["family"] = m.family.name();
    j["link"] = m.family.link_name();
    j["kappa"] = m.family.kind == FamilyKind::NegBin ? json(m.family.kappa) : json(nullptr);
    j["kappa_estimated"] = m.kappa_estimated;
    j["gamma"] = m.gamma;
    j["schema"] = schema_to_json(m.schema);
    j["schema_hash"] = schema_hash(m.schema);
    j["beta"] = detail::vector_to_json(m.beta);
    j["log_lambda"] = detail::vector_to_json(m.log_lambda);
    j["phi"] = m.phi;
    j["Vb"] = detail::matrix_to_json(m.Vb);
    j["edf"] = m.edf;
    j["deviance"] = m.deviance;
    j["aic"] = m.aic;
    j["gcv"] = m.gcv;
    j["iterations"] = m.iterations;
    j["converged"] = m.converged;
    j["ridge_used"] = m.ridge_used;
    j["n"] = m.n_obs;
    j["dropped_rows"] = m.dropped_rows;
    j["warnings"] = m.warnings;
    j["terms"] = std::move(terms);
    j["penalties"] = std::move(pens);
    j["lambda_trace"] = std::move(trace);
    j["kappa_trace"] = std::move(ktrace);
    return j;
}

/// Restores everything prediction, export and sampling need. Training
/// matrices (X, y, working weights) are not stored.
inline FittedModel model_from_json(const json& j) {
    try {
        check_format_version(j, "model file");
        FittedModel m;
        m.formula = j.at("formula").get<std::string>();
        m.response = j.at("response").get<std::string>();
        if (!j.at("offset").is_null()) m.offset_var = j.at("offset").get<std::string>();
        const FamilyKind fk = family_from_string(j.at("family").get<std::string>());
        m.family = fk == FamilyKind::NegBin    ? Family::negbin(j.at("kappa").get<double>())
                   : fk == FamilyKind::Poisson ? Family::poisson()
                                               : Family::gaussian();
        m.kappa_estimated = j.at("kappa_estimated").get<bool>();
        m.gamma = j.at("gamma").get<double>();
        m.schema = schema_from_json(j.at("schema"));
        if (schema_hash(m.schema) != j.at("schema_hash").get<std::string>())
            throw Error(ErrorKind::Input, "model file schema does not match its recorded hash");
        m.beta = detail::vector_from_json(j.at("beta"));
        m.log_lambda = detail::vector_from_json(j.at("log_lambda"));
        m.phi = j.at("phi").get<double>();
        m.Vb = detail::matrix_from_json(j.at("Vb"));
        m.edf = j.at("edf").get<double>();
        m.deviance = j.at("deviance").get<double>();
        m.aic = j.at("aic").get<double>();
        m.gcv = j.at("gcv").get<double>();
        m.iterations = j.at("iterations").get<int>();
        m.converged = j.at("converged").get<bool>();
        m.ridge_used = j.at("ridge_used").get<bool>();
        m.n_obs = j.at("n").get<Eigen::Index>();
        m.dropped_rows = j.at("dropped_rows").get<Eigen::Index>();
        m.warnings = j.at("warnings").get<std::vector<std::string>>();
        for (const auto& t : j.at("terms")) {
            TermInfo info;
            info.label = t.at("label").get<std::string>();
            info.offset = t.at("offset").get<Eigen::Index>();
            info.cols = t.at("cols").get<Eigen::Index>();
            info.edf = t.at("edf").get<double>();
            info.null_space_dim = t.at("null_space_dim").get<int>();
            info.slots = t.at("slots").get<std::vector<int>>();
            TermRecipe r;
            r.spec = detail::spec_from_json(t.at("spec"));
            info.cls = r.spec.cls;
            for (const auto& k : t.at("knots")) r.knots.push_back({k.get<std::vector<double>>()});
            r.constraint.Z = detail::matrix_from_json(t.at("constraint").at("Z"));
            r.constraint.constraints = t.at("constraint").at("constraints").get<int>();
            r.levels = t.at("levels").get<std::vector<std::string>>();
            for (const auto& l : t.at("lag_ranges")) r.lag_ranges.push_back({l.at(0), l.at(1), l.at(2)});
            m.terms.push_back(std::move(info));
            m.recipes.push_back(std::move(r));
        }
        for (const auto& p : j.at("penalties"))
            m.penalties.push_back({p.at("slot").get<int>(), p.at("block").get<std::size_t>(),
                                   p.at("offset").get<Eigen::Index>(), detail::matrix_from_json(p.at("S"))});
        for (const auto& tp : j.at("lambda_trace"))
            m.lambda_trace.push_back({detail::vector_from_json(tp.at("log_lambda")), tp.at("score").get<double>()});
        for (const auto& kp : j.at("kappa_trace"))
            m.kappa_trace.emplace_back(kp.at(0).get<double>(),
                                       kp.at(1).is_null() ? std::numeric_limits<double>::infinity()
                                                          : kp.at(1).get<double>());
        if (m.Vb.rows() != m.beta.size() || m.Vb.cols() != m.beta.size())
            throw Error(ErrorKind::Input, "model file covariance does not match the coefficients");
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, std::string("malformed model file: ") + e.what());
    }
}

inline void save_model(const FittedModel& m, const std::string& path) { write_file(path, model_to_json(m).dump(1) + "\n"); }

inline FittedModel load_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Input, "model file '" + path + "' is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

/// Refuses data whose schema differs from the one the model was fitted on.
inline void require_schema(const FittedModel& m, const Schema& s) {
    const std::string want = schema_hash(m.schema);
    const std::string got = schema_hash(s);
    if (want != got)
        throw Error(ErrorKind::Input, "schema hash " + got + " does not match the model's schema hash " + want +
                                          "; the data schema has changed since the model was fitted");
}

// ---------------------------------------------------------------- simulation

enum class SimKind { Vcm, Sofr, Dlm };

inline SimKind sim_kind_from_string(const std::string& s) {
    if (s == "vcm") return SimKind::Vcm;
    if (s == "sofr") return SimKind::Sofr;
    if (s == "dlm") return SimKind::Dlm;
    throw Error(ErrorKind::Input, "unknown simulation kind '" + s + "' (expected vcm, sofr or dlm)");
}

struct SimulationOptions {
    SimKind kind = SimKind::Vcm;
    int n = 500;
    int T = 30;
    std::uint64_t seed = 1;
    double sigma = -1;      // noise sd; negative selects the per-kind default
    double intercept = 1.0;
    int grid_points = 100;
};

struct Simulation {
    Dataset data;
    std::string formula;  // the matching model formula
    json truth;
};

namespace detail {

inline double vcm_theta(double z) { return std::sin(z); }
inline double sofr_probe(double v) { return std::exp(-v) * std::sin(2.0 * std::numbers::pi * v); }
inline double dlm_surface(double x, double t) { return x * std::exp(-t / 10.0); }

} // namespace detail

/// Synthetic data with known truth:
///   vcm  : y = b0 + sin(z) x + e,           z ~ U(0, 2 pi), x ~ N(0, 1)
///   sofr : y = b0 + sum_t X[t] s(V[t]) + e, V[t] = t / (T - 1), s(v) = exp(-v) sin(2 pi v)
///   dlm  : y = b0 + sum_t f(Temp[t], t) + e with Lag[t] = t, f(x, t) = x exp(-t / 10)
/// where Temp rows are overlapping windows of one autocorrelated series.
inline Simulation simulate(const SimulationOptions& o) {
    if (o.n < 2) throw Error(ErrorKind::Validation, "simulation needs n >= 2");
    if (o.kind != SimKind::Vcm && o.T < 2) throw Error(ErrorKind::Validation, "simulation needs T >= 2");
    if (o.grid_points < 2) throw Error(ErrorKind::Validation, "simulation grid needs at least 2 points");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::Index n = o.n;
    Simulation s;
    json truth{{"format_version", kFormatVersion}, {"n", o.n}, {"seed", o.seed}, {"intercept", o.intercept}};

    switch (o.kind) {
    case SimKind::Vcm: {
        const double sigma = o.sigma < 0 ? 0.1 : o.sigma;
        Vector z(n), x(n), y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            z(i) = 2.0 * std::numbers::pi * unif(rng);
            x(i) = normal(rng);
        }
        for (Eigen::Index i = 0; i < n; ++i) y(i) = o.intercept + detail::vcm_theta(z(i)) * x(i) + sigma * normal(rng);
        s.data.add_scalar("y", y);
        s.data.add_scalar("z", z);
        s.data.add_scalar("x", x);
        s.formula = "y ~ s(z, by=x)";
        const Vector g = Vector::LinSpaced(o.grid_points, z.minCoeff(), z.maxCoeff());
        std::vector<double> gv, tv;
        for (double v : g) {
            gv.push_back(v);
            tv.push_back(detail::vcm_theta(v));
        }
        truth.update({{"kind", "vcm"}, {"sigma", sigma}, {"function", "sin(z)"}, {"term", "s(z):x"},
                      {"grid", gv}, {"truth", tv}});
        break;
    }
    case SimKind::Sofr: {
        const double sigma = o.sigma < 0 ? 0.5 : o.sigma;
        const int T = o.T;
        Matrix V(n, T), X(n, T);
        std::vector<double> idx(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) idx[static_cast<std::size_t>(t)] = static_cast<double>(t) / (T - 1);
        Vector y(n), contrib(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double a[8];
            for (int k = 0; k < 8; ++k) a[k] = normal(rng);
            for (int t = 0; t < T; ++t) {
                const double v = idx[static_cast<std::size_t>(t)];
                double curve = 0;
                for (int k = 0; k < 8; ++k) curve += a[k] * std::sin((k + 1) * std::numbers::pi * v) / (k + 1);
                V(i, t) = v;
                X(i, t) = curve + 0.5 * normal(rng);
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0;
            for (int t = 0; t < T; ++t) c += X(i, t) * detail::sofr_probe(V(i, t));
            contrib(i) = c;
            y(i) = o.intercept + c + sigma * normal(rng);
        }
        s.data.add_scalar("y", y);
        s.data.add_matrix("V", V, idx);
        s.data.add_matrix("X", X, idx);
        s.formula = "y ~ s(V, by=X)";
        std::vector<double> tv;
        for (double v : idx) tv.push_back(detail::sofr_probe(v));
        truth.update({{"kind", "sofr"}, {"T", T}, {"sigma", sigma}, {"function", "exp(-v)*sin(2*pi*v)"},
                      {"term", "s(V):X"}, {"grid", idx}, {"truth", tv},
                      {"contribution", std::vector<double>(contrib.data(), contrib.data() + n)}});
        break;
    }
    case SimKind::Dlm: {
        const double sigma = o.sigma < 0 ? 0.5 : o.sigma;
        const int T = o.T;
        // AR(1) series long enough for n overlapping windows of length T
        const Eigen::Index len = n + T - 1;
        Vector series(len);
        double prev = 0;
        for (int burn = 0; burn < 50; ++burn) prev = 0.7 * prev + normal(rng);
        for (Eigen::Index k = 0; k < len; ++k) {
            prev = 0.7 * prev + normal(rng);
            series(k) = prev;
        }
        Matrix Temp(n, T), Lag(n, T);
        Vector y(n), contrib(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0;
            for (int t = 0; t < T; ++t) {
                Temp(i, t) = series(i + T - 1 - t);
                Lag(i, t) = t;
                c += detail::dlm_surface(Temp(i, t), t);
            }
            contrib(i) = c;
        }
        for (Eigen::Index i = 0; i < n; ++i) y(i) = o.intercept + contrib(i) + sigma * normal(rng);
        std::vector<double> lags(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t) lags[static_cast<std::size_t>(t)] = t;
        s.data.add_scalar("y", y);
        s.data.add_matrix("Temp", Temp, lags);
        s.data.add_matrix("Lag", Lag, lags);
        s.formula = "y ~ te(Temp, Lag)";
        const Vector gx = Vector::LinSpaced(o.grid_points, Temp.minCoeff(), Temp.maxCoeff());
        json surface = json::array();
        for (int t = 0; t < T; ++t)
            for (double x : gx) surface.push_back({x, static_cast<double>(t), detail::dlm_surface(x, t)});
        truth.update({{"kind", "dlm"}, {"T", T}, {"sigma", sigma}, {"function", "x*exp(-t/10)"},
                      {"term", "te(Temp,Lag)"}, {"surface", surface},
                      {"contribution", std::vector<double>(contrib.data(), contrib.data() + n)}});
        break;
    }
    }
    truth["formula"] = s.formula;
    s.truth = std::move(truth);
    return s;
}

} // namespace lfgam
