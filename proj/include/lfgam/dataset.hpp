#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lfgam/errors.hpp"

namespace lfgam {

enum class ColumnRole { Scalar, Binary, Factor, Matrix };

inline const char* to_string(ColumnRole role) {
    switch (role) {
    case ColumnRole::Scalar: return "scalar";
    case ColumnRole::Binary: return "binary";
    case ColumnRole::Factor: return "factor";
    case ColumnRole::Matrix: return "matrix";
    }
    return "?";
}

inline ColumnRole column_role_from_string(const std::string& s) {
    if (s == "scalar") return ColumnRole::Scalar;
    if (s == "binary") return ColumnRole::Binary;
    if (s == "factor") return ColumnRole::Factor;
    if (s == "matrix") return ColumnRole::Matrix;
    throw Error(ErrorKind::Input, "unknown column role '" + s + "'");
}

struct ColumnSchema {
    std::string name;
    ColumnRole role = ColumnRole::Scalar;
    int width = 1;                       // T for matrix columns
    std::vector<double> index_values;    // optional, length T
    int n_levels = 0;                    // factor columns, 0 when unknown

    [[nodiscard]] bool is_scalar_like() const noexcept {
        return role == ColumnRole::Scalar || role == ColumnRole::Binary;
    }
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<ColumnSchema> cols) : cols_(std::move(cols)) {
        for (std::size_t i = 0; i < cols_.size(); ++i) {
            if (!index_.emplace(cols_[i].name, i).second)
                throw Error(ErrorKind::Input, "duplicate column '" + cols_[i].name + "' in schema");
        }
    }

    [[nodiscard]] const ColumnSchema* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : &cols_[it->second];
    }

    [[nodiscard]] const ColumnSchema& at(const std::string& name) const {
        const auto* c = find(name);
        if (!c) throw Error(ErrorKind::Resolution, "unknown column '" + name + "'");
        return *c;
    }

    [[nodiscard]] const std::vector<ColumnSchema>& columns() const noexcept { return cols_; }

private:
    std::vector<ColumnSchema> cols_;
    std::map<std::string, std::size_t> index_;
};

struct Column {
    ColumnSchema meta;
    Eigen::VectorXd values;          // scalar / binary, NaN marks a missing cell
    std::vector<int> codes;          // factor level codes
    std::vector<std::string> levels; // factor levels in first-appearance order
    Eigen::MatrixXd matrix;          // n x T
};

/// Column-oriented data with scalar, factor and matrix-valued columns.
class Dataset {
public:
    [[nodiscard]] Eigen::Index rows() const noexcept { return n_; }
    [[nodiscard]] bool has(const std::string& name) const { return index_.count(name) > 0; }

    [[nodiscard]] const Column& column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error(ErrorKind::Resolution, "unknown column '" + name + "'");
        return cols_[it->second];
    }

    [[nodiscard]] const std::vector<Column>& columns() const noexcept { return cols_; }

    void add_scalar(const std::string& name, Eigen::VectorXd values) {
        Column c;
        c.meta = {name, ColumnRole::Scalar, 1, {}, 0};
        const Eigen::Index n = values.size();
        c.values = std::move(values);
        add(std::move(c), n);
    }

    void add_binary(const std::string& name, Eigen::VectorXd values) {
        for (double v : values)
            if (!std::isnan(v) && v != 0.0 && v != 1.0)
                throw Error(ErrorKind::Validation,
                            "binary column '" + name + "' holds value " + std::to_string(v));
        Column c;
        c.meta = {name, ColumnRole::Binary, 1, {}, 0};
        const Eigen::Index n = values.size();
        c.values = std::move(values);
        add(std::move(c), n);
    }

    /// Levels are collected in first-appearance order unless given.
    void add_factor(const std::string& name, const std::vector<std::string>& labels,
                    std::vector<std::string> levels = {}) {
        Column c;
        std::map<std::string, int> lookup;
        for (std::size_t i = 0; i < levels.size(); ++i) lookup.emplace(levels[i], static_cast<int>(i));
        c.codes.reserve(labels.size());
        for (const auto& l : labels) {
            auto it = lookup.find(l);
            if (it == lookup.end()) {
                it = lookup.emplace(l, static_cast<int>(levels.size())).first;
                levels.push_back(l);
            }
            c.codes.push_back(it->second);
        }
        c.levels = std::move(levels);
        c.meta = {name, ColumnRole::Factor, 1, {}, static_cast<int>(c.levels.size())};
        add(std::move(c), static_cast<Eigen::Index>(labels.size()));
    }

    void add_matrix(const std::string& name, Eigen::MatrixXd values, std::vector<double> index_values = {}) {
        if (values.cols() < 1) throw Error(ErrorKind::Input, "matrix column '" + name + "' has no columns");
        if (!index_values.empty() && static_cast<Eigen::Index>(index_values.size()) != values.cols())
            throw Error(ErrorKind::Input, "index_values of '" + name + "' do not match its width");
        if (!values.allFinite())
            throw Error(ErrorKind::Validation, "matrix column '" + name + "' has missing or non-finite cells");
        Column c;
        c.meta = {name, ColumnRole::Matrix, static_cast<int>(values.cols()), std::move(index_values), 0};
        const Eigen::Index n = values.rows();
        c.matrix = std::move(values);
        add(std::move(c), n);
    }

    [[nodiscard]] Schema schema() const {
        std::vector<ColumnSchema> out;
        for (const auto& c : cols_) out.push_back(c.meta);
        return Schema(std::move(out));
    }

    /// Rows `keep` (in order) of every column.
    [[nodiscard]] Dataset subset(const std::vector<Eigen::Index>& keep) const {
        Dataset out;
        for (const auto& c : cols_) {
            Column d;
            d.meta = c.meta;
            d.levels = c.levels;
            switch (c.meta.role) {
            case ColumnRole::Scalar:
            case ColumnRole::Binary:
                d.values.resize(static_cast<Eigen::Index>(keep.size()));
                for (std::size_t i = 0; i < keep.size(); ++i) d.values(i) = c.values(keep[i]);
                break;
            case ColumnRole::Factor:
                for (auto r : keep) d.codes.push_back(c.codes[r]);
                break;
            case ColumnRole::Matrix:
                d.matrix.resize(static_cast<Eigen::Index>(keep.size()), c.matrix.cols());
                for (std::size_t i = 0; i < keep.size(); ++i) d.matrix.row(i) = c.matrix.row(keep[i]);
                break;
            }
            out.add(std::move(d), static_cast<Eigen::Index>(keep.size()));
        }
        out.n_ = static_cast<Eigen::Index>(keep.size());
        return out;
    }

private:
    void add(Column c, Eigen::Index n) {
        if (index_.count(c.meta.name)) throw Error(ErrorKind::Input, "duplicate column '" + c.meta.name + "'");
        if (!cols_.empty() && n != n_)
            throw Error(ErrorKind::Dimension, "column '" + c.meta.name + "' has " + std::to_string(n) +
                                                  " rows, dataset has " + std::to_string(n_));
        n_ = n;
        index_.emplace(c.meta.name, cols_.size());
        cols_.push_back(std::move(c));
    }

    std::vector<Column> cols_;
    std::map<std::string, std::size_t> index_;
    Eigen::Index n_ = 0;
};

} // namespace lfgam
