#pragma once

// Model formula mini-language.
//
//   formula := ident '~' term ('+' term)*
//   term    := '1' | '0' | ident | 'offset(' ident ')'
//            | ('s' | 'te') '(' ident (',' ident)* (',' kv)* ')'
//   kv      := 'k' '=' (int | '(' int (',' int)* ')')
//            | 'bs' '=' (ident | '(' ident (',' ident)* ')')
//            | 'by' '=' ident
//            | 'center' '=' ('true' | 'false' | 'TRUE' | 'FALSE')
//
// '0' drops the intercept, which is otherwise always present. Whitespace is
// insignificant. Arithmetic and interactions are not part of the language.

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lfgam/dataset.hpp"
#include "lfgam/terms.hpp"

namespace lfgam {

enum class TermFunc { Intercept, NoIntercept, Linear, Offset, Smooth, Tensor };

struct TermNode {
    TermFunc func = TermFunc::Linear;
    std::vector<std::string> args;
    std::vector<int> k;
    std::vector<std::string> bs;
    std::optional<std::string> by;
    std::optional<bool> center;
    std::size_t position = 0;  // byte offset of the term in the source

    friend bool operator==(const TermNode& a, const TermNode& b) {
        return a.func == b.func && a.args == b.args && a.k == b.k && a.bs == b.bs && a.by == b.by &&
               a.center == b.center;
    }
};

struct FormulaAST {
    std::string response;
    std::vector<TermNode> terms;

    friend bool operator==(const FormulaAST&, const FormulaAST&) = default;
};

namespace detail {

enum class Tok { Ident, Int, Tilde, Plus, LParen, RParen, Comma, Equals, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t pos;
};

inline const char* describe(Tok t) {
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::Tilde: return "'~'";
    case Tok::Plus: return "'+'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Equals: return "'='";
    case Tok::End: return "end of input";
    }
    return "?";
}

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (ident_start(c)) {
            while (i < src.size() && ident_char(src[i])) ++i;
            out.push_back({Tok::Ident, std::string(src.substr(start, i - start)), start});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
            out.push_back({Tok::Int, std::string(src.substr(start, i - start)), start});
            continue;
        }
        Tok kind;
        switch (c) {
        case '~': kind = Tok::Tilde; break;
        case '+': kind = Tok::Plus; break;
        case '(': kind = Tok::LParen; break;
        case ')': kind = Tok::RParen; break;
        case ',': kind = Tok::Comma; break;
        case '=': kind = Tok::Equals; break;
        default:
            throw SyntaxError(std::string("unexpected character '") + c + "'", start, {});
        }
        out.push_back({kind, std::string(1, c), start});
        ++i;
    }
    out.push_back({Tok::End, "", src.size()});
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(lex(src)) {}

    FormulaAST parse() {
        FormulaAST ast;
        ast.response = expect(Tok::Ident).text;
        expect(Tok::Tilde);
        ast.terms.push_back(term());
        while (peek().kind == Tok::Plus) {
            next();
            ast.terms.push_back(term());
        }
        if (peek().kind != Tok::End) fail("unexpected token '" + peek().text + "'", {describe(Tok::Plus), describe(Tok::End)});
        bool seen_offset = false;
        for (const auto& t : ast.terms) {
            if (t.func != TermFunc::Offset) continue;
            if (seen_offset) throw SyntaxError("at most one offset is allowed", t.position, {});
            seen_offset = true;
        }
        return ast;
    }

private:
    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected) const {
        throw SyntaxError(msg, peek().pos, std::move(expected));
    }

    const Token& expect(Tok kind) {
        if (peek().kind != kind) {
            const std::string found = peek().kind == Tok::End ? "end of input" : "'" + peek().text + "'";
            fail("found " + found, {describe(kind)});
        }
        return next();
    }

    TermNode term() {
        TermNode node;
        node.position = peek().pos;
        if (peek().kind == Tok::Int) {
            const auto& t = next();
            if (t.text == "1") node.func = TermFunc::Intercept;
            else if (t.text == "0") node.func = TermFunc::NoIntercept;
            else throw SyntaxError("only '1' or '0' may appear as a constant term", t.pos, {"'1'", "'0'"});
            return node;
        }
        if (peek().kind != Tok::Ident) fail("expected a term", {"'1'", "'0'", describe(Tok::Ident)});
        const Token name = next();
        if (peek().kind != Tok::LParen) {
            node.func = TermFunc::Linear;
            node.args.push_back(name.text);
            return node;
        }
        if (name.text == "offset") {
            node.func = TermFunc::Offset;
            next();
            node.args.push_back(expect(Tok::Ident).text);
            expect(Tok::RParen);
            return node;
        }
        if (name.text != "s" && name.text != "te")
            throw SyntaxError("unknown function '" + name.text + "'", name.pos, {"s", "te", "offset"});
        node.func = name.text == "s" ? TermFunc::Smooth : TermFunc::Tensor;
        next();
        if (peek().kind == Tok::RParen)
            throw SyntaxError("empty argument list for " + name.text + "()", name.pos, {describe(Tok::Ident)});
        node.args.push_back(expect(Tok::Ident).text);
        std::set<std::string> seen;
        while (peek().kind == Tok::Comma) {
            next();
            if (peek().kind == Tok::Ident && peek(1).kind == Tok::Equals) {
                keyword(node, seen);
            } else {
                if (!seen.empty()) fail("positional argument after keyword arguments", {"k", "bs", "by", "center"});
                node.args.push_back(expect(Tok::Ident).text);
            }
        }
        expect(Tok::RParen);
        return node;
    }

    void keyword(TermNode& node, std::set<std::string>& seen) {
        const Token key = next();
        if (key.text != "k" && key.text != "bs" && key.text != "by" && key.text != "center")
            throw SyntaxError("unknown keyword '" + key.text + "'", key.pos, {"k", "bs", "by", "center"});
        if (!seen.insert(key.text).second)
            throw SyntaxError("duplicate keyword '" + key.text + "'", key.pos, {});
        expect(Tok::Equals);
        if (key.text == "k") {
            for (const auto& t : value_list(Tok::Int)) {
                const int v = std::stoi(t.text);
                if (v < 1) throw SyntaxError("k must be positive", t.pos, {});
                node.k.push_back(v);
            }
        } else if (key.text == "bs") {
            for (const auto& t : value_list(Tok::Ident)) {
                if (t.text != "cr" && t.text != "cc" && t.text != "re")
                    throw SyntaxError("unknown basis '" + t.text + "'", t.pos, {"cr", "cc", "re"});
                node.bs.push_back(t.text);
            }
        } else if (key.text == "by") {
            node.by = expect(Tok::Ident).text;
        } else {
            const Token v = expect(Tok::Ident);
            if (v.text == "true" || v.text == "TRUE") node.center = true;
            else if (v.text == "false" || v.text == "FALSE") node.center = false;
            else throw SyntaxError("center expects a boolean", v.pos, {"true", "false"});
        }
    }

    std::vector<Token> value_list(Tok kind) {
        std::vector<Token> out;
        if (peek().kind != Tok::LParen) {
            out.push_back(expect(kind));
            return out;
        }
        next();
        out.push_back(expect(kind));
        while (peek().kind == Tok::Comma) {
            next();
            out.push_back(expect(kind));
        }
        expect(Tok::RParen);
        return out;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline FormulaAST parse_formula(std::string_view text) { return detail::Parser(text).parse(); }

inline std::string to_string(const TermNode& t) {
    auto list = [](const auto& v, auto fmt) {
        std::string s = v.size() == 1 ? fmt(v[0]) : "(";
        if (v.size() != 1) {
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
            s += ")";
        }
        return s;
    };
    switch (t.func) {
    case TermFunc::Intercept: return "1";
    case TermFunc::NoIntercept: return "0";
    case TermFunc::Linear: return t.args.front();
    case TermFunc::Offset: return "offset(" + t.args.front() + ")";
    default: break;
    }
    std::string out = t.func == TermFunc::Smooth ? "s(" : "te(";
    for (std::size_t i = 0; i < t.args.size(); ++i) out += (i ? ", " : "") + t.args[i];
    if (!t.k.empty()) out += ", k=" + list(t.k, [](int v) { return std::to_string(v); });
    if (!t.bs.empty()) out += ", bs=" + list(t.bs, [](const std::string& v) { return v; });
    if (t.by) out += ", by=" + *t.by;
    if (t.center) out += std::string(", center=") + (*t.center ? "true" : "false");
    return out + ")";
}

inline std::string to_string(const FormulaAST& ast) {
    std::string out = ast.response + " ~ ";
    for (std::size_t i = 0; i < ast.terms.size(); ++i) out += (i ? " + " : "") + to_string(ast.terms[i]);
    return out;
}

struct ResolvedFormula {
    std::string response;
    std::optional<std::string> offset;
    bool intercept = true;
    std::vector<TermSpec> terms;  // excludes the intercept
};

inline constexpr int kDefaultSmoothK = 10;
inline constexpr int kDefaultTensorMarginK = 5;

namespace detail {

inline BasisKind basis_kind(const std::string& bs) {
    if (bs == "cc") return BasisKind::CyclicCubic;
    if (bs == "re") return BasisKind::RandomEffect;
    return BasisKind::CubicBSpline;
}

template <class T>
T per_margin(const std::vector<T>& v, std::size_t j, T fallback, const std::string& what, const std::string& label) {
    if (v.empty()) return fallback;
    if (v.size() == 1) return v.front();
    if (j >= v.size() || v.size() == 0)
        throw Error(ErrorKind::Resolution, "term " + label + ": " + what + " list does not match the arguments");
    return v[j];
}

inline TermSpec resolve_smooth(const TermNode& node, const Schema& schema) {
    TermSpec spec;
    spec.kind = node.func == TermFunc::Smooth ? TermKind::Smooth : TermKind::Tensor;
    spec.vars = node.args;
    const std::string label = to_string(node);

    std::size_t n_matrix = 0;
    for (const auto& a : node.args)
        if (schema.at(a).role == ColumnRole::Matrix) ++n_matrix;
    if (n_matrix != 0 && n_matrix != node.args.size())
        throw Error(ErrorKind::Resolution, "term " + label + " mixes matrix and scalar arguments");
    spec.summed = n_matrix > 0;
    if (spec.summed) {
        const int T = schema.at(node.args.front()).width;
        for (const auto& a : node.args)
            if (schema.at(a).width != T)
                throw Error(ErrorKind::Dimension, "term " + label + ": matrix columns '" + node.args.front() +
                                                      "' (" + std::to_string(T) + ") and '" + a + "' (" +
                                                      std::to_string(schema.at(a).width) +
                                                      ") must be of the same size");
    }
    if ((!node.k.empty() && node.k.size() != 1 && node.k.size() != node.args.size()) ||
        (!node.bs.empty() && node.bs.size() != 1 && node.bs.size() != node.args.size()))
        throw Error(ErrorKind::Resolution, "term " + label + ": k/bs lists must have one entry per argument");

    const bool multi = node.args.size() > 1 || spec.kind == TermKind::Tensor;
    const int default_k = multi ? kDefaultTensorMarginK : kDefaultSmoothK;
    for (std::size_t j = 0; j < node.args.size(); ++j) {
        BasisSpec b;
        b.kind = basis_kind(per_margin<std::string>(node.bs, j, "cr", "bs", label));
        b.k = per_margin<int>(node.k, j, default_k, "k", label);
        const auto& col = schema.at(node.args[j]);
        if (b.kind == BasisKind::RandomEffect) {
            if (col.role != ColumnRole::Factor)
                throw Error(ErrorKind::Resolution, "term " + label + ": bs=re needs a factor, '" + node.args[j] +
                                                       "' is " + to_string(col.role));
            b.k = col.n_levels;
        } else if (col.role == ColumnRole::Factor) {
            throw Error(ErrorKind::Resolution,
                        "term " + label + ": factor '" + node.args[j] + "' needs bs=re or a by= factor");
        }
        spec.margins.push_back(b);
    }

    const bool is_re = spec.margins.size() == 1 && spec.margins.front().kind == BasisKind::RandomEffect;
    if (node.by) {
        spec.by_var = *node.by;
        const auto& by = schema.at(spec.by_var);
        switch (by.role) {
        case ColumnRole::Matrix:
            if (!spec.summed)
                throw Error(ErrorKind::Resolution, "term " + label + ": matrix by-variable '" + spec.by_var +
                                                       "' requires matrix arguments");
            if (by.width != schema.at(node.args.front()).width)
                throw Error(ErrorKind::Dimension, "term " + label + ": matrix columns '" + node.args.front() +
                                                      "' (" + std::to_string(schema.at(node.args.front()).width) +
                                                      ") and '" + spec.by_var + "' (" + std::to_string(by.width) +
                                                      ") must be of the same size");
            spec.by = ByKind::Matrix;
            spec.cls = TermClass::Sofr;
            break;
        case ColumnRole::Factor:
        case ColumnRole::Scalar:
        case ColumnRole::Binary:
            if (spec.summed)
                throw Error(ErrorKind::Resolution, "term " + label +
                                                       ": matrix arguments need a matrix by-variable or none");
            if (is_re) throw Error(ErrorKind::Resolution, "term " + label + ": bs=re does not take a by-variable");
            spec.by = by.role == ColumnRole::Factor   ? ByKind::Factor
                      : by.role == ColumnRole::Binary ? ByKind::Binary
                                                      : ByKind::Numeric;
            spec.cls = by.role == ColumnRole::Factor ? TermClass::FactorBy : TermClass::VaryingCoefficient;
            break;
        }
    } else if (spec.summed) {
        spec.cls = spec.kind == TermKind::Tensor && spec.margins.size() > 1 ? TermClass::Dlm : TermClass::SummedSmooth;
        if (spec.kind == TermKind::Smooth && spec.margins.size() > 1) spec.cls = TermClass::Dlm;
    } else if (is_re) {
        spec.cls = TermClass::RandomEffect;
    } else {
        spec.cls = spec.margins.size() > 1 ? TermClass::PlainTensor : TermClass::PlainSmooth;
    }
    if (spec.summed)
        for (const auto& m : spec.margins)
            if (m.kind == BasisKind::RandomEffect)
                throw Error(ErrorKind::Resolution, "term " + label + ": bs=re needs a factor argument");
    spec.center = node.center.value_or(default_center(spec.cls));
    return spec;
}

} // namespace detail

/// Classifies every term against the column schema.
inline ResolvedFormula resolve(const FormulaAST& ast, const Schema& schema) {
    ResolvedFormula out;
    out.response = ast.response;
    const auto& resp = schema.at(ast.response);
    if (!resp.is_scalar_like())
        throw Error(ErrorKind::Resolution, "response '" + ast.response + "' must be a scalar column");

    std::set<std::string> labels;
    for (const auto& node : ast.terms) {
        TermSpec spec;
        switch (node.func) {
        case TermFunc::Intercept: out.intercept = true; continue;
        case TermFunc::NoIntercept: out.intercept = false; continue;
        case TermFunc::Offset: {
            const auto& c = schema.at(node.args.front());
            if (!c.is_scalar_like())
                throw Error(ErrorKind::Resolution, "offset '" + c.name + "' must be a scalar column");
            out.offset = c.name;
            continue;
        }
        case TermFunc::Linear: {
            const auto& c = schema.at(node.args.front());
            spec.kind = TermKind::Linear;
            spec.vars = node.args;
            spec.center = false;
            if (c.role == ColumnRole::Matrix)
                throw Error(ErrorKind::Resolution, "matrix column '" + c.name + "' cannot enter as a linear term");
            spec.cls = c.role == ColumnRole::Factor ? TermClass::LinearFactor : TermClass::Linear;
            break;
        }
        case TermFunc::Smooth:
        case TermFunc::Tensor: spec = detail::resolve_smooth(node, schema); break;
        }
        if (!labels.insert(spec.label()).second)
            throw Error(ErrorKind::Validation, "duplicate term " + spec.label());
        out.terms.push_back(std::move(spec));
    }
    return out;
}

} // namespace lfgam
