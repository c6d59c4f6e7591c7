#pragma once

// Model terms: turns a resolved term description plus data into design
// columns and penalties. A smooth of matrix-valued arguments is summed over
// the matrix columns. With a matrix `by` multiplier this gives
// scalar-on-function terms; a tensor smooth of two matrices gives a
// distributed-lag term.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lfgam/bases.hpp"
#include "lfgam/dataset.hpp"
#include "lfgam/tensor.hpp"

namespace lfgam {

enum class TermKind { Intercept, Linear, Offset, Smooth, Tensor };
enum class ByKind { None, Numeric, Binary, Factor, Matrix };

enum class TermClass {
    Intercept,
    Linear,
    LinearFactor,
    PlainSmooth,
    RandomEffect,
    PlainTensor,
    VaryingCoefficient,
    FactorBy,
    Sofr,
    Dlm,
    SummedSmooth,
};

inline const char* to_string(TermClass c) {
    switch (c) {
    case TermClass::Intercept: return "intercept";
    case TermClass::Linear: return "linear";
    case TermClass::LinearFactor: return "linear-factor";
    case TermClass::PlainSmooth: return "smooth";
    case TermClass::RandomEffect: return "random-effect";
    case TermClass::PlainTensor: return "tensor";
    case TermClass::VaryingCoefficient: return "vcm";
    case TermClass::FactorBy: return "factor-by";
    case TermClass::Sofr: return "sofr";
    case TermClass::Dlm: return "dlm";
    case TermClass::SummedSmooth: return "summed-smooth";
    }
    return "?";
}

inline const char* to_string(ByKind b) {
    switch (b) {
    case ByKind::None: return "none";
    case ByKind::Numeric: return "numeric";
    case ByKind::Binary: return "binary";
    case ByKind::Factor: return "factor";
    case ByKind::Matrix: return "matrix";
    }
    return "?";
}

inline const char* to_string(TermKind k) {
    switch (k) {
    case TermKind::Intercept: return "intercept";
    case TermKind::Linear: return "linear";
    case TermKind::Offset: return "offset";
    case TermKind::Smooth: return "s";
    case TermKind::Tensor: return "te";
    }
    return "?";
}

struct TermSpec {
    TermKind kind = TermKind::Smooth;
    TermClass cls = TermClass::PlainSmooth;
    std::vector<std::string> vars;
    std::vector<BasisSpec> margins;
    ByKind by = ByKind::None;
    std::string by_var;
    bool center = true;
    bool summed = false;                 // arguments are matrix columns
    std::vector<double> column_weights;  // per matrix column; empty means all 1

    [[nodiscard]] std::string label() const {
        switch (kind) {
        case TermKind::Intercept: return "(Intercept)";
        case TermKind::Linear: return vars.front();
        case TermKind::Offset: return "offset(" + vars.front() + ")";
        default: break;
        }
        std::string out = kind == TermKind::Tensor ? "te(" : "s(";
        for (std::size_t i = 0; i < vars.size(); ++i) out += (i ? "," : "") + vars[i];
        out += ")";
        if (by != ByKind::None) out += ":" + by_var;
        return out;
    }

    friend bool operator==(const TermSpec&, const TermSpec&) = default;
};

/// Default centering for a term class: smooths whose identifiability flows
/// through a multiplier are left uncentered.
inline bool default_center(TermClass c) {
    switch (c) {
    case TermClass::PlainSmooth:
    case TermClass::PlainTensor:
    case TermClass::FactorBy:
    case TermClass::Dlm:
    case TermClass::SummedSmooth: return true;
    default: return false;
    }
}

/// Per-lag covariate range of a distributed-lag term, kept for plotting.
struct LagRange {
    double lag = 0;
    double lower = 0;
    double upper = 0;
    friend bool operator==(const LagRange&, const LagRange&) = default;
};

/// Everything needed to rebuild a term's design on new data.
struct TermRecipe {
    TermSpec spec;
    std::vector<KnotVector> knots;       // one per margin
    ConstraintTransform constraint;      // applied to the raw per-level basis
    std::vector<std::string> levels;     // factor levels (by, random effect, linear factor)
    std::vector<LagRange> lag_ranges;    // distributed-lag terms only

    [[nodiscard]] Eigen::Index raw_dim() const {
        Eigen::Index p = 1;
        for (const auto& m : spec.margins) p *= m.k;
        return p;
    }
};

struct DesignBlock {
    std::string label;
    Matrix X;
    std::vector<Matrix> penalties;  // block-local, one smoothing parameter each
    TermRecipe recipe;
    int null_space_dim = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline Vector scalar_values(const Dataset& data, const std::string& name) {
    const auto& c = data.column(name);
    if (!c.meta.is_scalar_like())
        throw Error(ErrorKind::Resolution, "column '" + name + "' is " + to_string(c.meta.role) +
                                               ", expected scalar");
    for (double v : c.values)
        if (!std::isfinite(v))
            throw Error(ErrorKind::Validation, "column '" + name + "' has missing or non-finite values");
    return c.values;
}

inline const Matrix& matrix_values(const Dataset& data, const std::string& name) {
    const auto& c = data.column(name);
    if (c.meta.role != ColumnRole::Matrix)
        throw Error(ErrorKind::Resolution, "column '" + name + "' is not a matrix column");
    return c.matrix;
}

/// Factor codes of `name` re-expressed against `levels`.
inline std::vector<int> factor_codes(const Dataset& data, const std::string& name,
                                     const std::vector<std::string>& levels) {
    const auto& c = data.column(name);
    if (c.meta.role != ColumnRole::Factor)
        throw Error(ErrorKind::Resolution, "column '" + name + "' is not a factor");
    std::map<std::string, int> lookup;
    for (std::size_t i = 0; i < levels.size(); ++i) lookup.emplace(levels[i], static_cast<int>(i));
    std::vector<int> remap(c.levels.size(), -1);
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
        auto it = lookup.find(c.levels[i]);
        if (it != lookup.end()) remap[i] = it->second;
    }
    std::vector<int> out;
    out.reserve(c.codes.size());
    for (int code : c.codes) {
        if (code < 0 || remap[code] < 0)
            throw Error(ErrorKind::Validation, "factor '" + name + "' has level '" +
                                                   (code < 0 ? std::string("<missing>") : c.levels[code]) +
                                                   "' unseen at fit time");
        out.push_back(remap[code]);
    }
    return out;
}

inline Vector codes_as_values(const std::vector<int>& codes) {
    Vector v(static_cast<Eigen::Index>(codes.size()));
    for (std::size_t i = 0; i < codes.size(); ++i) v(static_cast<Eigen::Index>(i)) = codes[i];
    return v;
}

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

// Values of margin j for non-summed terms.
inline Vector margin_values(const TermRecipe& r, std::size_t j, const Dataset& data) {
    const auto& name = r.spec.vars[j];
    if (r.spec.margins[j].kind == BasisKind::RandomEffect)
        return codes_as_values(factor_codes(data, name, r.levels));
    return scalar_values(data, name);
}

inline Matrix raw_tensor_design(const TermRecipe& r, const std::vector<Vector>& values) {
    std::vector<Matrix> ms;
    ms.reserve(values.size());
    for (std::size_t j = 0; j < values.size(); ++j)
        ms.push_back(eval_basis(r.spec.margins[j], r.knots[j], as_span(values[j])));
    return tensor_design(ms);
}

inline Vector column_weights(const TermRecipe& r, Eigen::Index T) {
    if (r.spec.column_weights.empty()) return Vector::Ones(T);
    if (static_cast<Eigen::Index>(r.spec.column_weights.size()) != T)
        throw Error(ErrorKind::Dimension, "term " + r.spec.label() + ": " +
                                              std::to_string(r.spec.column_weights.size()) +
                                              " column weights for " + std::to_string(T) + " columns");
    return Eigen::Map<const Vector>(r.spec.column_weights.data(), T);
}

// Summed design before any constraint:
// row i = sum_t w_t * by[i,t] * kron_j basis_j(M_j[i,t]).
inline Matrix raw_summed_design(const TermRecipe& r, const Dataset& data) {
    const auto& spec = r.spec;
    std::vector<const Matrix*> mats;
    for (const auto& v : spec.vars) mats.push_back(&matrix_values(data, v));
    const Eigen::Index n = mats.front()->rows();
    const Eigen::Index T = mats.front()->cols();
    for (std::size_t j = 1; j < mats.size(); ++j)
        if (mats[j]->cols() != T)
            throw Error(ErrorKind::Dimension, "matrix columns '" + spec.vars.front() + "' (" +
                                                  std::to_string(T) + ") and '" + spec.vars[j] + "' (" +
                                                  std::to_string(mats[j]->cols()) +
                                                  ") must be of the same size");
    const Matrix* by = nullptr;
    if (spec.by == ByKind::Matrix) {
        by = &matrix_values(data, spec.by_var);
        if (by->cols() != T || by->rows() != n)
            throw Error(ErrorKind::Dimension, "matrix columns '" + spec.vars.front() + "' (" +
                                                  std::to_string(T) + ") and '" + spec.by_var + "' (" +
                                                  std::to_string(by->cols()) + ") must be of the same size");
    }
    const Vector w = column_weights(r, T);

    Matrix out = Matrix::Zero(n, r.raw_dim());
    std::vector<Vector> cell(mats.size());
    for (Eigen::Index t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < mats.size(); ++j) cell[j] = mats[j]->col(t);
        Matrix D = raw_tensor_design(r, cell);
        Vector scale = Vector::Constant(n, w(t));
        if (by) scale = scale.cwiseProduct(by->col(t));
        out += scale.asDiagonal() * D;
    }
    return out;
}

inline Matrix dummy_columns(const std::vector<int>& codes, std::size_t n_levels) {
    Matrix X = Matrix::Zero(static_cast<Eigen::Index>(codes.size()),
                            static_cast<Eigen::Index>(n_levels) - 1);
    for (std::size_t i = 0; i < codes.size(); ++i)
        if (codes[i] > 0) X(static_cast<Eigen::Index>(i), codes[i] - 1) = 1.0;
    return X;
}

} // namespace detail

/// Design columns for a term whose recipe has been learned.
inline Matrix term_design(const TermRecipe& r, const Dataset& data) {
    const auto& spec = r.spec;
    const Eigen::Index n = data.rows();
    switch (spec.cls) {
    case TermClass::Intercept: return Matrix::Ones(n, 1);
    case TermClass::Linear: return detail::scalar_values(data, spec.vars.front());
    case TermClass::LinearFactor:
        return detail::dummy_columns(detail::factor_codes(data, spec.vars.front(), r.levels), r.levels.size());
    case TermClass::Sofr:
    case TermClass::Dlm:
    case TermClass::SummedSmooth: return detail::raw_summed_design(r, data) * r.constraint.Z;
    default: break;
    }

    std::vector<Vector> values;
    for (std::size_t j = 0; j < spec.vars.size(); ++j) values.push_back(detail::margin_values(r, j, data));
    Matrix raw = detail::raw_tensor_design(r, values);

    if (spec.cls == TermClass::VaryingCoefficient) {
        const Vector by = detail::scalar_values(data, spec.by_var);
        if (spec.by == ByKind::Binary)
            for (double v : by)
                if (v != 0.0 && v != 1.0)
                    throw Error(ErrorKind::Validation, "binary by-variable '" + spec.by_var + "' holds value " +
                                                           std::to_string(v));
        raw = by.asDiagonal() * raw;
        return raw * r.constraint.Z;
    }
    if (spec.cls == TermClass::FactorBy) {
        const Matrix base = raw * r.constraint.Z;
        const auto codes = detail::factor_codes(data, spec.by_var, r.levels);
        const Eigen::Index kc = base.cols();
        Matrix out = Matrix::Zero(n, kc * static_cast<Eigen::Index>(r.levels.size()));
        for (Eigen::Index i = 0; i < n; ++i) out.block(i, codes[i] * kc, 1, kc) = base.row(i);
        return out;
    }
    return raw * r.constraint.Z;
}

/// Basis rows of a term's smooth at explicit margin values, without any
/// by-multiplier or summation (theta(z) for varying coefficients, s(v) for
/// scalar-on-function terms, s(x, lag) for distributed lags). For factor-by
/// terms `level` selects the block that is filled.
inline Matrix smooth_rows(const TermRecipe& r, const std::vector<Vector>& values, int level = 0) {
    Matrix base = detail::raw_tensor_design(r, values) * r.constraint.Z;
    if (r.spec.cls != TermClass::FactorBy) return base;
    Matrix out = Matrix::Zero(base.rows(), base.cols() * static_cast<Eigen::Index>(r.levels.size()));
    out.middleCols(level * base.cols(), base.cols()) = base;
    return out;
}

namespace detail {

inline void check_not_constant(const Vector& v, const std::string& label) {
    if (v.size() == 0 || v.maxCoeff() == v.minCoeff())
        throw Error(ErrorKind::Identifiability,
                    "term " + label + " is not identifiable: covariate is constant, so the centered basis "
                                      "is rank deficient");
}

inline std::vector<double> flatten(const Matrix& M) {
    return {M.data(), M.data() + M.size()};
}

inline std::vector<Matrix> margin_penalties(const TermRecipe& r) {
    std::vector<Matrix> ms;
    for (std::size_t j = 0; j < r.spec.margins.size(); ++j)
        ms.push_back(penalty_matrix(r.spec.margins[j], r.knots[j]).S);
    return ms.size() == 1 ? ms : tensor_penalties(ms);
}

inline int raw_null_space_dim(const TermSpec& s) {
    int d = 1;
    for (const auto& m : s.margins) d *= m.null_space_dim();
    return d;
}

inline Matrix block_diagonal(const Matrix& S, std::size_t copies) {
    const Eigen::Index k = S.rows();
    Matrix out = Matrix::Zero(k * static_cast<Eigen::Index>(copies), k * static_cast<Eigen::Index>(copies));
    for (std::size_t f = 0; f < copies; ++f)
        out.block(static_cast<Eigen::Index>(f) * k, static_cast<Eigen::Index>(f) * k, k, k) = S;
    return out;
}

inline std::vector<std::string> lag_spacing_warnings(const Matrix& lag, const std::string& label) {
    for (Eigen::Index i = 0; i < lag.rows(); ++i) {
        if (lag.cols() < 3) break;
        const double step = lag(i, 1) - lag(i, 0);
        const double tol = 1e-9 * std::max(1.0, lag.row(i).cwiseAbs().maxCoeff());
        for (Eigen::Index t = 2; t < lag.cols(); ++t)
            if (std::abs(lag(i, t) - lag(i, t - 1) - step) > tol)
                return {"term " + label + ": lag spacing is non-uniform (row " + std::to_string(i) + ")"};
    }
    return {};
}

inline std::vector<LagRange> lag_ranges(const Matrix& x, const Matrix& lag) {
    std::map<double, std::pair<double, double>> ranges;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index t = 0; t < x.cols(); ++t) {
            auto [it, inserted] = ranges.try_emplace(lag(i, t), x(i, t), x(i, t));
            if (!inserted) {
                it->second.first = std::min(it->second.first, x(i, t));
                it->second.second = std::max(it->second.second, x(i, t));
            }
        }
    std::vector<LagRange> out;
    for (const auto& [l, r] : ranges) out.push_back({l, r.first, r.second});
    return out;
}

} // namespace detail

/// Learns knots, levels and constraint for `spec` on `data` and realizes the
/// design block. Dispatches on the term class.
inline DesignBlock build_term(const TermSpec& spec, const Dataset& data) {
    DesignBlock block;
    block.label = spec.label();
    TermRecipe& r = block.recipe;
    r.spec = spec;
    const auto label = block.label;

    if (spec.cls == TermClass::Intercept || spec.cls == TermClass::Linear) {
        r.constraint = identity_transform(1);
        block.X = term_design(r, data);
        return block;
    }
    if (spec.cls == TermClass::LinearFactor) {
        r.levels = data.column(spec.vars.front()).levels;
        if (r.levels.size() < 2)
            throw Error(ErrorKind::Identifiability, "factor term " + label + " needs at least 2 levels");
        r.constraint = identity_transform(static_cast<Eigen::Index>(r.levels.size()) - 1);
        block.X = term_design(r, data);
        return block;
    }

    if (spec.margins.size() != spec.vars.size())
        throw Error(ErrorKind::Validation, "term " + label + " needs one basis per argument");

    // knots (or levels) per margin
    for (std::size_t j = 0; j < spec.vars.size(); ++j) {
        auto& m = r.spec.margins[j];
        if (m.kind == BasisKind::RandomEffect) {
            if (spec.summed) throw Error(ErrorKind::Resolution, "random-effect basis needs a factor argument");
            r.levels = data.column(spec.vars[j]).levels;
            m.k = static_cast<int>(r.levels.size());
            r.knots.emplace_back();
            continue;
        }
        std::vector<double> cells;
        if (spec.summed) {
            cells = detail::flatten(detail::matrix_values(data, spec.vars[j]));
        } else {
            const Vector v = detail::scalar_values(data, spec.vars[j]);
            if (spec.center && spec.cls != TermClass::VaryingCoefficient) detail::check_not_constant(v, label);
            cells.assign(v.data(), v.data() + v.size());
        }
        r.knots.push_back(place_knots(cells, m));
    }

    std::vector<Matrix> penalties = detail::margin_penalties(r);
    const Eigen::Index p_raw = r.raw_dim();
    int null_dim = detail::raw_null_space_dim(r.spec);

    if (spec.cls == TermClass::FactorBy) {
        const auto& levels = data.column(spec.by_var).levels;
        if (levels.size() < 2)
            throw Error(ErrorKind::Validation, "factor by-variable '" + spec.by_var + "' needs at least 2 levels");
        r.levels = levels;
    }
    if (spec.cls == TermClass::VaryingCoefficient && spec.by == ByKind::Binary) {
        const Vector by = detail::scalar_values(data, spec.by_var);
        for (double v : by)
            if (v != 0.0 && v != 1.0)
                throw Error(ErrorKind::Validation,
                            "binary by-variable '" + spec.by_var + "' holds value " + std::to_string(v));
    }

    if (r.spec.center) {
        // the constraint is computed on the term's own raw basis: for factor-by
        // terms on the base smooth over all rows, so every level shares it
        Matrix raw;
        if (spec.summed) {
            raw = detail::raw_summed_design(r, data);
        } else {
            std::vector<Vector> values;
            for (std::size_t j = 0; j < spec.vars.size(); ++j) values.push_back(detail::margin_values(r, j, data));
            raw = detail::raw_tensor_design(r, values);
            if (spec.cls == TermClass::VaryingCoefficient)
                raw = detail::scalar_values(data, spec.by_var).asDiagonal() * raw;
        }
        r.constraint = sum_to_zero_transform(raw);
        for (auto& S : penalties) {
            S = r.constraint.Z.transpose() * S * r.constraint.Z;
            S = 0.5 * (S + S.transpose()).eval();
        }
        null_dim = std::max(0, null_dim - 1);
        if (spec.cls == TermClass::Dlm || spec.cls == TermClass::SummedSmooth) {
            // summed terms can have directions that add the same amount to
            // every row (a smooth of a lag index shared by all rows); these
            // are absorbed into the constraint
            if (auto keep = identifiable_directions(raw * r.constraint.Z, penalties)) {
                const Eigen::Index lost = r.constraint.Z.cols() - keep->cols();
                r.constraint.Z = r.constraint.Z * *keep;
                r.constraint.constraints += static_cast<int>(lost);
                for (auto& S : penalties) {
                    S = keep->transpose() * S * *keep;
                    S = 0.5 * (S + S.transpose()).eval();
                }
                null_dim = std::max(0, null_dim - static_cast<int>(lost));
            }
        }
        check_identifiable(raw * r.constraint.Z, penalties, label);
    } else {
        r.constraint = identity_transform(p_raw);
    }

    if (spec.cls == TermClass::FactorBy) {
        for (auto& S : penalties) S = detail::block_diagonal(S, r.levels.size());
        null_dim *= static_cast<int>(r.levels.size());
    }

    if (spec.cls == TermClass::Dlm) {
        const Matrix& x = detail::matrix_values(data, spec.vars.front());
        const Matrix& lag = detail::matrix_values(data, spec.vars.back());
        for (auto& w : detail::lag_spacing_warnings(lag, label)) block.warnings.push_back(std::move(w));
        r.lag_ranges = detail::lag_ranges(x, lag);
    }

    block.X = term_design(r, data);
    block.penalties = std::move(penalties);
    block.null_space_dim = null_dim;
    return block;
}

inline void require_class(const TermSpec& spec, std::initializer_list<TermClass> allowed, const char* what) {
    if (std::find(allowed.begin(), allowed.end(), spec.cls) == allowed.end())
        throw Error(ErrorKind::Validation,
                    std::string(what) + " cannot build term " + spec.label() + " of class " + to_string(spec.cls));
}

/// s(x): centered univariate smooth (or random effect with bs=re).
inline DesignBlock build_plain_smooth(const TermSpec& spec, const Dataset& data) {
    require_class(spec, {TermClass::PlainSmooth, TermClass::PlainTensor, TermClass::RandomEffect},
                  "build_plain_smooth");
    return build_term(spec, data);
}

/// s(z, by=x) for numeric, binary or factor x.
inline DesignBlock build_by_smooth(const TermSpec& spec, const Dataset& data) {
    require_class(spec, {TermClass::VaryingCoefficient, TermClass::FactorBy}, "build_by_smooth");
    return build_term(spec, data);
}

/// s(V, by=X) with V and X matrix columns of equal shape.
inline DesignBlock build_sofr(const TermSpec& spec, const Dataset& data) {
    require_class(spec, {TermClass::Sofr}, "build_sofr");
    return build_term(spec, data);
}

/// te(X, LAG) with X and LAG matrix columns of equal shape.
inline DesignBlock build_dlm(const TermSpec& spec, const Dataset& data) {
    require_class(spec, {TermClass::Dlm}, "build_dlm");
    return build_term(spec, data);
}

struct EmbeddedPenalty {
    int slot = 0;
    std::size_t block = 0;
    Eigen::Index offset = 0;
    Matrix S;
};

struct BlockRange {
    std::string label;
    Eigen::Index offset = 0;
    Eigen::Index cols = 0;
};

/// Full model matrix plus the registry of embedded penalties.
struct ModelMatrix {
    Matrix X;
    std::vector<BlockRange> ranges;
    std::vector<EmbeddedPenalty> penalties;  // index == slot id
    Vector offset;

    [[nodiscard]] int n_slots() const noexcept { return static_cast<int>(penalties.size()); }

    /// sum_j lambda_j S_j embedded in p x p.
    [[nodiscard]] Matrix penalty_sum(const Vector& lambda) const {
        const Eigen::Index p = X.cols();
        Matrix out = Matrix::Zero(p, p);
        for (const auto& e : penalties)
            out.block(e.offset, e.offset, e.S.rows(), e.S.cols()) += lambda(e.slot) * e.S;
        return out;
    }

    /// beta' S_j beta for every slot, using only the embedded block.
    [[nodiscard]] Vector penalty_quadratic_forms(const Vector& beta) const {
        Vector out(n_slots());
        for (const auto& e : penalties) {
            const auto b = beta.segment(e.offset, e.S.rows());
            out(e.slot) = b.dot(e.S * b);
        }
        return out;
    }
};

inline ModelMatrix assemble_model(const std::vector<DesignBlock>& blocks, Vector offset = Vector()) {
    if (blocks.empty()) throw Error(ErrorKind::Validation, "model has no terms");
    const Eigen::Index n = blocks.front().X.rows();
    std::set<std::string> labels;
    Eigen::Index p = 0;
    for (const auto& b : blocks) {
        if (b.X.rows() != n)
            throw Error(ErrorKind::Dimension, "term " + b.label + " has " + std::to_string(b.X.rows()) +
                                                  " rows, expected " + std::to_string(n));
        if (!labels.insert(b.label).second)
            throw Error(ErrorKind::Validation, "duplicate term label " + b.label);
        p += b.X.cols();
    }
    if (offset.size() == 0) offset = Vector::Zero(n);
    if (offset.size() != n) throw Error(ErrorKind::Dimension, "offset length does not match the data");

    ModelMatrix mm;
    mm.X.resize(n, p);
    mm.offset = std::move(offset);
    Eigen::Index col = 0;
    int slot = 0;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& b = blocks[bi];
        mm.X.middleCols(col, b.X.cols()) = b.X;
        mm.ranges.push_back({b.label, col, b.X.cols()});
        for (const auto& S : b.penalties) {
            if (S.rows() != b.X.cols())
                throw Error(ErrorKind::Dimension, "penalty of term " + b.label + " does not match its columns");
            mm.penalties.push_back({slot++, bi, col, S});
        }
        col += b.X.cols();
    }
    return mm;
}

} // namespace lfgam
