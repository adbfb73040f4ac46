#pragma once

#include "expr.hpp"

namespace thirdint::sym {

using Exponents = std::vector<int>;

/// Coefficients of e viewed as a polynomial in `vars`. Zero coefficients are omitted.
inline std::map<Exponents, Expr> poly_coeffs(const Expr& e, const std::vector<std::string>& vars) {
    std::map<Exponents, detail::Accum> acc;
    for (const auto& t : e.terms()) {
        Exponents ex(vars.size(), 0);
        Monomial rest;
        for (const auto& f : t.mono) {
            const Atom& a = *f.base;
            if (a.kind == AtomKind::Symbol) {
                auto it = std::find(vars.begin(), vars.end(), a.name);
                if (it != vars.end()) {
                    if (!is_integer(f.exp) || f.exp < 0)
                        throw NonPolynomialError("non-polynomial power of " + a.name + " in " + to_string(e));
                    ex[static_cast<std::size_t>(it - vars.begin())] = static_cast<int>(f.exp.get_num().get_si());
                    continue;
                }
            }
            for (const auto& v : vars)
                if (std::binary_search(a.free.begin(), a.free.end(), v))
                    throw NonPolynomialError("non-polynomial dependence on " + v + " in " + to_string(e));
            rest.push_back(f);
        }
        auto [it, inserted] = acc[ex].try_emplace(std::move(rest), t.coeff);
        if (!inserted) it->second += t.coeff;
    }
    std::map<Exponents, Expr> out;
    for (auto& [ex, a] : acc) {
        Expr c = detail::finalize(std::move(a));
        if (!c.is_zero()) out.emplace(ex, std::move(c));
    }
    return out;
}

inline Expr from_coeffs(const std::map<Exponents, Expr>& coeffs, const std::vector<std::string>& vars) {
    Expr out;
    for (const auto& [ex, c] : coeffs) {
        Expr m(1);
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (ex[i]) m = m * pow(Expr::symbol(vars[i]), Rational(ex[i]));
        out += c * m;
    }
    return out;
}

/// Groups e by the part of each monomial that depends on any of `vars`
/// (any atom kind, including radicals and denominators). Returns (key, coefficient)
/// pairs where key is a coefficient-1 product and the coefficient is free of vars.
inline std::vector<std::pair<Expr, Expr>> collect(const Expr& e, const std::vector<std::string>& vars) {
    std::map<std::size_t, std::vector<std::pair<Monomial, detail::Accum>>> buckets;
    for (const auto& t : e.terms()) {
        Monomial key, rest;
        for (const auto& f : t.mono) {
            bool dep = false;
            for (const auto& v : vars)
                if (std::binary_search(f.base->free.begin(), f.base->free.end(), v)) dep = true;
            (dep ? key : rest).push_back(f);
        }
        auto& bucket = buckets[detail::hash_mono(key)];
        auto it = std::find_if(bucket.begin(), bucket.end(), [&](auto& p) { return detail::MonoEq{}(p.first, key); });
        if (it == bucket.end()) {
            bucket.emplace_back(key, detail::Accum{});
            it = bucket.end() - 1;
        }
        auto [jt, inserted] = it->second.try_emplace(std::move(rest), t.coeff);
        if (!inserted) jt->second += t.coeff;
    }
    std::vector<std::pair<Expr, Expr>> out;
    for (auto& [h, bucket] : buckets) {
        for (auto& [key, a] : bucket) {
            Expr c = detail::finalize(std::move(a));
            if (!c.is_zero()) out.emplace_back(detail::single_term(1, key), std::move(c));
        }
    }
    std::sort(out.begin(), out.end(), [](auto& x, auto& y) { return compare(x.first, y.first) < 0; });
    return out;
}

/// Coefficients c_i with e = sum c_i * names_i; throws when e is not linear homogeneous in names.
inline std::vector<Expr> linear_coeffs(const Expr& e, const std::vector<std::string>& names) {
    std::vector<detail::Accum> acc(names.size());
    for (const auto& t : e.terms()) {
        int which = -1;
        Monomial rest;
        for (const auto& f : t.mono) {
            if (f.base->kind == AtomKind::Symbol) {
                auto it = std::find(names.begin(), names.end(), f.base->name);
                if (it != names.end()) {
                    if (which >= 0 || f.exp != 1) throw NonPolynomialError("not linear in the given names: " + to_string(e));
                    which = static_cast<int>(it - names.begin());
                    continue;
                }
            }
            rest.push_back(f);
        }
        if (which < 0) throw NonPolynomialError("term without a linear name: " + to_string(e));
        auto [it, inserted] = acc[static_cast<std::size_t>(which)].try_emplace(std::move(rest), t.coeff);
        if (!inserted) it->second += t.coeff;
    }
    std::vector<Expr> out;
    out.reserve(names.size());
    for (auto& a : acc) out.push_back(detail::finalize(std::move(a)));
    return out;
}


/// Splits e = sum_k c_k * J_k + rest where J_k are jets entering linearly.
/// Keys are jet keys as produced by jet_key(); a term with a nonlinear jet factor throws.
struct JetLinear {
    std::map<std::string, Expr> coeffs;
    Expr rest;
};

inline JetLinear collect_jets(const Expr& e) {
    std::map<std::string, detail::Accum> acc;
    detail::Accum rest;
    for (const auto& t : e.terms()) {
        const Atom* jet = nullptr;
        Monomial other;
        for (const auto& f : t.mono) {
            if (f.base->kind == AtomKind::Jet) {
                if (jet || f.exp != 1) throw NonPolynomialError("not linear in the unknown functions: " + to_string(e));
                jet = f.base.get();
                continue;
            }
            other.push_back(f);
        }
        auto& target = jet ? acc[jet->name + std::string(static_cast<std::size_t>(jet->order), '\'') + "(" + jet->var + ")"] : rest;
        auto [it, inserted] = target.try_emplace(std::move(other), t.coeff);
        if (!inserted) it->second += t.coeff;
    }
    JetLinear out;
    for (auto& [k, a] : acc) {
        Expr c = detail::finalize(std::move(a));
        if (!c.is_zero()) out.coeffs.emplace(k, std::move(c));
    }
    out.rest = detail::finalize(std::move(rest));
    return out;
}

// ---------------------------------------------------------------------------
// exact linear algebra over the rationals

using RMatrix = std::vector<std::vector<Rational>>;
using RVector = std::vector<Rational>;

/// Reduced row echelon form in place, pivoting on the first `cols` columns
/// (extra columns are carried along); returns pivot columns.
inline std::vector<std::size_t> rref(RMatrix& m, std::size_t cols) {
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t c = 0; c < cols && row < m.size(); ++c) {
        std::size_t p = row;
        while (p < m.size() && m[p][c] == 0) ++p;
        if (p == m.size()) continue;
        std::swap(m[p], m[row]);
        const Rational inv = 1 / m[row][c];
        const std::size_t width = m[row].size();
        for (std::size_t j = c; j < width; ++j) m[row][j] *= inv;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (i == row || m[i][c] == 0) continue;
            const Rational f = m[i][c];
            for (std::size_t j = c; j < width; ++j) m[i][j] -= f * m[row][j];
        }
        pivots.push_back(c);
        ++row;
    }
    m.resize(row);
    return pivots;
}

inline std::size_t rank(RMatrix m, std::size_t cols) { return rref(m, cols).size(); }

/// Basis of {x : m x = 0}, one vector per free column, with a 1 at the free column.
inline std::vector<RVector> nullspace(RMatrix m, std::size_t cols) {
    const auto pivots = rref(m, cols);
    std::vector<RVector> basis;
    for (std::size_t free = 0; free < cols; ++free) {
        if (std::find(pivots.begin(), pivots.end(), free) != pivots.end()) continue;
        RVector v(cols, Rational(0));
        v[free] = 1;
        for (std::size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -m[r][free];
        basis.push_back(std::move(v));
    }
    return basis;
}

} // namespace thirdint::sym
