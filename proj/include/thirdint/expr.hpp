#pragma once

// Exact symbolic expressions in a canonical sum-of-products form.
//
// Every Expr is kept normalized at construction: a sorted list of terms, each
// a nonzero rational coefficient times a monomial of atoms raised to nonzero
// rational exponents. Atoms are rational constants (only under fractional
// exponents), symbols, jets of undetermined one-variable functions, sin/cos of
// an argument, and opaque sums (only under negative or fractional exponents;
// positive integer powers of sums are always expanded).
//
// Rewrites applied during normalization:
//   * like terms collected, like factors merged by adding exponents;
//   * integer parts of exponents on sums are expanded, so (sqrt f)^2 -> f;
//   * products of sin/cos of k*t (same variable t) are reduced to the linear
//     basis {sin k t, cos k t} by product-to-sum identities.
// The form is canonical on polynomials, Laurent polynomials and trigonometric
// polynomials. It is not canonical for general rational functions: no common
// denominators are formed and no polynomial division is attempted.
//
// Power rules on products are applied formally, (a*b)^q = a^q * b^q, which is
// valid for positive bases.

#include "errors.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace thirdint::sym {

using Rational = mpq_class;

// ---------------------------------------------------------------------------
// rational helpers

inline bool is_integer(const Rational& q) { return q.get_den() == 1; }

inline mpz_class floor_of(const Rational& q) {
    mpz_class r;
    mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
    return r;
}

inline Rational rpow(const Rational& base, const mpz_class& n) {
    if (!n.fits_slong_p()) throw EvalError("exponent out of range");
    long k = n.get_si();
    Rational b = base;
    if (k < 0) {
        if (b == 0) throw EvalError("division by zero");
        b = 1 / b;
        k = -k;
    }
    mpz_class num, den;
    mpz_pow_ui(num.get_mpz_t(), b.get_num_mpz_t(), static_cast<unsigned long>(k));
    mpz_pow_ui(den.get_mpz_t(), b.get_den_mpz_t(), static_cast<unsigned long>(k));
    Rational r(num, den);
    r.canonicalize();
    return r;
}

/// base^q when the result is rational, nullopt otherwise.
inline std::optional<Rational> exact_pow(const Rational& base, const Rational& q) {
    if (is_integer(q)) return rpow(base, q.get_num());
    const mpz_class& b = q.get_den();
    if (!b.fits_ulong_p()) return std::nullopt;
    const unsigned long k = b.get_ui();
    Rational x = base;
    bool neg = false;
    if (x < 0) {
        if (k % 2 == 0) return std::nullopt;
        neg = true;
        x = -x;
    }
    mpz_class rn, rd;
    if (!mpz_root(rn.get_mpz_t(), x.get_num_mpz_t(), k)) return std::nullopt;
    if (!mpz_root(rd.get_mpz_t(), x.get_den_mpz_t(), k)) return std::nullopt;
    Rational root(rn, rd);
    root.canonicalize();
    if (neg) root = -root;
    return rpow(root, q.get_num());
}

inline std::string rational_str(const Rational& q) { return q.get_str(); }

namespace detail {

inline std::size_t hash_combine(std::size_t seed, std::size_t v) {
    return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

inline std::size_t hash_mpz(const mpz_class& z) {
    std::size_t h = static_cast<std::size_t>(mpz_sgn(z.get_mpz_t()) + 7);
    const std::size_t n = mpz_size(z.get_mpz_t());
    for (std::size_t i = 0; i < n; ++i)
        h = hash_combine(h, static_cast<std::size_t>(mpz_getlimbn(z.get_mpz_t(), static_cast<mp_size_t>(i))));
    return h;
}

inline std::size_t hash_rational(const Rational& q) {
    return hash_combine(hash_mpz(q.get_num()), hash_mpz(q.get_den()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// variable registry

/// Names that denote coordinates or momenta. Every other identifier is a parameter.
inline bool is_variable_name(std::string_view name) {
    static constexpr std::array<std::string_view, 26> names{
        "x1", "x2", "x", "y", "z", "t", "r", "th", "xi", "eta", "u", "v", "p1",
        "p2", "pr", "pth", "pxi", "peta", "pu", "pv", "q1", "q2", "s", "w", "X", "Y"};
    return std::find(names.begin(), names.end(), name) != names.end();
}

inline bool is_identifier(std::string_view name) {
    if (name.empty()) return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    if (!alpha(name[0])) return false;
    return std::all_of(name.begin(), name.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

// ---------------------------------------------------------------------------
// core data

struct Atom;
using AtomPtr = std::shared_ptr<const Atom>;

struct Factor {
    AtomPtr base;
    Rational exp;
};

using Monomial = std::vector<Factor>;

struct Term {
    Monomial mono;
    Rational coeff;
    double coeff_d = 0.0;
};

namespace detail {
struct ExprData {
    std::vector<Term> terms;
    std::size_t hash = 0;
    std::vector<std::string> free;  // sorted symbol names the value depends on
};
} // namespace detail

class Expr {
public:
    Expr();
    Expr(int v);  // NOLINT(google-explicit-constructor)
    Expr(long v);  // NOLINT(google-explicit-constructor)
    Expr(const Rational& v);  // NOLINT(google-explicit-constructor)
    explicit Expr(std::shared_ptr<const detail::ExprData> data) : d_(std::move(data)) {}

    static Expr symbol(const std::string& name);
    /// order-th derivative of an undetermined function `function` of `variable`.
    static Expr jet(const std::string& function, const std::string& variable, int order = 0);

    const std::vector<Term>& terms() const { return d_->terms; }
    std::size_t hash() const { return d_->hash; }
    const std::vector<std::string>& free_symbols() const { return d_->free; }
    bool depends_on(std::string_view name) const {
        return std::binary_search(d_->free.begin(), d_->free.end(), name,
                                  [](auto&& a, auto&& b) { return std::string_view(a) < std::string_view(b); });
    }
    bool is_zero() const { return d_->terms.empty(); }
    bool is_constant() const { return d_->terms.empty() || (d_->terms.size() == 1 && d_->terms[0].mono.empty()); }
    std::optional<Rational> constant_value() const {
        if (d_->terms.empty()) return Rational(0);
        if (d_->terms.size() == 1 && d_->terms[0].mono.empty()) return d_->terms[0].coeff;
        return std::nullopt;
    }
    const detail::ExprData* raw() const { return d_.get(); }

private:
    std::shared_ptr<const detail::ExprData> d_;
};

enum class AtomKind : int { Constant = 0, Symbol = 1, Jet = 2, Sin = 3, Cos = 4, Sum = 5 };

struct Atom {
    AtomKind kind = AtomKind::Symbol;
    std::string name;  // symbol name or jet function name
    std::string var;   // jet variable
    int order = 0;     // jet derivative order
    Rational value;    // constant base
    Expr arg;          // trig argument or sum base
    std::size_t hash = 0;
    std::vector<std::string> free;
};

// ---------------------------------------------------------------------------
// ordering

int compare(const Expr& a, const Expr& b);

inline int compare(const Atom& a, const Atom& b) {
    if (&a == &b) return 0;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind) ? -1 : 1;
    switch (a.kind) {
    case AtomKind::Constant: return cmp(a.value, b.value) < 0 ? -1 : (cmp(a.value, b.value) > 0 ? 1 : 0);
    case AtomKind::Symbol: return a.name.compare(b.name) < 0 ? -1 : (a.name == b.name ? 0 : 1);
    case AtomKind::Jet: {
        if (int c = a.name.compare(b.name)) return c < 0 ? -1 : 1;
        if (int c = a.var.compare(b.var)) return c < 0 ? -1 : 1;
        return a.order < b.order ? -1 : (a.order > b.order ? 1 : 0);
    }
    case AtomKind::Sin:
    case AtomKind::Cos:
    case AtomKind::Sum: return compare(a.arg, b.arg);
    }
    return 0;
}

inline int compare_mono(const Monomial& a, const Monomial& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (int c = compare(*a[i].base, *b[i].base)) return c;
        if (int c = cmp(a[i].exp, b[i].exp)) return c > 0 ? -1 : 1;
    }
    if (a.size() == b.size()) return 0;
    return a.size() > b.size() ? -1 : 1;
}

inline int compare(const Expr& a, const Expr& b) {
    if (a.raw() == b.raw()) return 0;
    const auto& ta = a.terms();
    const auto& tb = b.terms();
    if (ta.size() != tb.size()) return ta.size() < tb.size() ? -1 : 1;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (int c = compare_mono(ta[i].mono, tb[i].mono)) return c;
        if (int c = cmp(ta[i].coeff, tb[i].coeff)) return c < 0 ? -1 : 1;
    }
    return 0;
}

inline bool operator==(const Expr& a, const Expr& b) { return a.hash() == b.hash() && compare(a, b) == 0; }
inline bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

namespace detail {

inline std::size_t hash_mono(const Monomial& m) {
    std::size_t h = 0x51ed27;
    for (const auto& f : m) h = hash_combine(hash_combine(h, f.base->hash), hash_rational(f.exp));
    return h;
}

struct MonoHash {
    std::size_t operator()(const Monomial& m) const { return hash_mono(m); }
};
struct MonoEq {
    bool operator()(const Monomial& a, const Monomial& b) const {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].base->hash != b[i].base->hash || a[i].exp != b[i].exp) return false;
        }
        return compare_mono(a, b) == 0;
    }
};

using Accum = std::unordered_map<Monomial, Rational, MonoHash, MonoEq>;

inline std::vector<std::string> union_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::string> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline Expr finalize(std::vector<Term> terms) {
    std::sort(terms.begin(), terms.end(), [](const Term& x, const Term& y) { return compare_mono(x.mono, y.mono) < 0; });
    auto data = std::make_shared<ExprData>();
    std::size_t h = 0xabcdef;
    std::vector<std::string> free;
    for (auto& t : terms) {
        t.coeff_d = t.coeff.get_d();
        h = hash_combine(hash_combine(h, hash_mono(t.mono)), hash_rational(t.coeff));
        for (const auto& f : t.mono)
            if (!f.base->free.empty()) free = union_sorted(free, f.base->free);
    }
    data->terms = std::move(terms);
    data->hash = h;
    data->free = std::move(free);
    return Expr(std::shared_ptr<const ExprData>(std::move(data)));
}

inline Expr finalize(Accum&& acc) {
    std::vector<Term> terms;
    terms.reserve(acc.size());
    for (auto& [m, c] : acc)
        if (c != 0) terms.push_back(Term{m, c, 0.0});
    return finalize(std::move(terms));
}

inline void accumulate(Accum& acc, const Expr& e, const Rational& scale = Rational(1)) {
    for (const auto& t : e.terms()) {
        auto [it, inserted] = acc.try_emplace(t.mono, t.coeff * scale);
        if (!inserted) it->second += t.coeff * scale;
    }
}

inline Monomial merge(const Monomial& a, const Monomial& b) {
    Monomial out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const int c = compare(*a[i].base, *b[j].base);
        if (c < 0) {
            out.push_back(a[i++]);
        } else if (c > 0) {
            out.push_back(b[j++]);
        } else {
            Rational e = a[i].exp + b[j].exp;
            if (e != 0) out.push_back(Factor{a[i].base, e});
            ++i;
            ++j;
        }
    }
    for (; i < a.size(); ++i) out.push_back(a[i]);
    for (; j < b.size(); ++j) out.push_back(b[j]);
    return out;
}

inline std::shared_ptr<const ExprData> zero_data() {
    static const std::shared_ptr<const ExprData> z = std::make_shared<const ExprData>(ExprData{{}, 0xabcdef, {}});
    return z;
}

inline Expr single_term(const Rational& c, Monomial m) {
    if (c == 0) return Expr();
    std::vector<Term> t;
    t.push_back(Term{std::move(m), c, 0.0});
    return finalize(std::move(t));
}

inline AtomPtr make_atom(Atom a) {
    std::size_t h = hash_combine(0x1234, static_cast<std::size_t>(a.kind));
    switch (a.kind) {
    case AtomKind::Constant: h = hash_combine(h, hash_rational(a.value)); break;
    case AtomKind::Symbol:
        h = hash_combine(h, std::hash<std::string>{}(a.name));
        a.free = {a.name};
        break;
    case AtomKind::Jet:
        h = hash_combine(hash_combine(hash_combine(h, std::hash<std::string>{}(a.name)), std::hash<std::string>{}(a.var)),
                         static_cast<std::size_t>(a.order));
        a.free = {a.var};
        break;
    case AtomKind::Sin:
    case AtomKind::Cos:
    case AtomKind::Sum:
        h = hash_combine(h, a.arg.hash());
        a.free = a.arg.free_symbols();
        break;
    }
    a.hash = h;
    return std::make_shared<const Atom>(std::move(a));
}

inline AtomPtr constant_atom(const Rational& v) {
    Atom a;
    a.kind = AtomKind::Constant;
    a.value = v;
    return make_atom(std::move(a));
}

inline AtomPtr sum_atom(const Expr& base) {
    Atom a;
    a.kind = AtomKind::Sum;
    a.arg = base;
    return make_atom(std::move(a));
}

inline AtomPtr trig_atom(bool is_sin, const Expr& arg) {
    Atom a;
    a.kind = is_sin ? AtomKind::Sin : AtomKind::Cos;
    a.arg = arg;
    return make_atom(std::move(a));
}

} // namespace detail

inline Expr::Expr() : d_(detail::zero_data()) {}
inline Expr::Expr(const Rational& v) : d_(v == 0 ? detail::zero_data() : detail::single_term(v, {}).d_) {}
inline Expr::Expr(int v) : Expr(Rational(v)) {}
inline Expr::Expr(long v) : Expr(Rational(v)) {}

inline Expr Expr::symbol(const std::string& name) {
    if (!is_identifier(name)) throw SymbolError("invalid symbol name '" + name + "'");
    Atom a;
    a.kind = AtomKind::Symbol;
    a.name = name;
    return detail::single_term(1, {Factor{detail::make_atom(std::move(a)), 1}});
}

inline Expr Expr::jet(const std::string& function, const std::string& variable, int order) {
    if (!is_identifier(function)) throw SymbolError("invalid function name '" + function + "'");
    if (!is_variable_name(variable)) throw SymbolError("unknown variable '" + variable + "'");
    if (order < 0) throw SymbolError("negative derivative order");
    Atom a;
    a.kind = AtomKind::Jet;
    a.name = function;
    a.var = variable;
    a.order = order;
    return detail::single_term(1, {Factor{detail::make_atom(std::move(a)), 1}});
}

// ---------------------------------------------------------------------------
// arithmetic

Expr operator*(const Expr& a, const Expr& b);
Expr pow(const Expr& b, const Rational& q);
Expr sin(const Expr& arg);
Expr cos(const Expr& arg);

inline Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    detail::Accum acc;
    acc.reserve(a.terms().size() + b.terms().size());
    detail::accumulate(acc, a);
    detail::accumulate(acc, b);
    return detail::finalize(std::move(acc));
}

inline Expr scale(const Expr& a, const Rational& s) {
    if (s == 0 || a.is_zero()) return Expr();
    if (s == 1) return a;
    std::vector<Term> t = a.terms();
    for (auto& x : t) x.coeff *= s;
    return detail::finalize(std::move(t));
}

inline Expr operator-(const Expr& a) { return scale(a, Rational(-1)); }
inline Expr operator-(const Expr& a, const Expr& b) { return a + scale(b, Rational(-1)); }

namespace detail {

/// k and the variable name when arg == k*var with k rational.
inline bool linear_single_var(const Expr& arg, std::string* var, Rational* k) {
    if (arg.terms().size() != 1) return false;
    const Term& t = arg.terms()[0];
    if (t.mono.size() != 1 || t.mono[0].exp != 1 || t.mono[0].base->kind != AtomKind::Symbol) return false;
    if (var) *var = t.mono[0].base->name;
    if (k) *k = t.coeff;
    return true;
}

inline Expr pow_pos_int(const Expr& b, unsigned long n) {
    Expr result(1);
    Expr base = b;
    while (n) {
        if (n & 1UL) result = result * base;
        n >>= 1;
        if (n) base = base * base;
    }
    return result;
}

inline Expr product_to_sum(const Atom& t1, const Atom& t2) {
    const Expr& a = t1.arg;
    const Expr& b = t2.arg;
    const Rational half(1, 2);
    const bool s1 = t1.kind == AtomKind::Sin;
    const bool s2 = t2.kind == AtomKind::Sin;
    if (s1 && s2) return scale(cos(a - b) - cos(a + b), half);
    if (!s1 && !s2) return scale(cos(a - b) + cos(a + b), half);
    if (s1) return scale(sin(a + b) + sin(a - b), half);
    return scale(sin(a + b) - sin(a - b), half);
}

/// Builds the canonical form of c * prod(m), m sorted with merged bases.
inline Expr normalize_term(Rational c, Monomial m) {
    if (c == 0) return Expr();
    // constants under fractional exponents
    for (std::size_t i = 0; i < m.size();) {
        if (m[i].base->kind != AtomKind::Constant) {
            ++i;
            continue;
        }
        const mpz_class n = floor_of(m[i].exp);
        Rational frac = m[i].exp - Rational(n);
        c *= rpow(m[i].base->value, n);
        if (frac != 0) {
            if (auto r = exact_pow(m[i].base->value, frac)) {
                c *= *r;
                frac = 0;
            }
        }
        if (frac == 0) {
            m.erase(m.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            m[i].exp = frac;
            ++i;
        }
    }
    // integer parts of sums are expanded
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].base->kind == AtomKind::Sum && m[i].exp >= 1) {
            const mpz_class n = floor_of(m[i].exp);
            const Rational frac = m[i].exp - Rational(n);
            Expr base = m[i].base->arg;
            if (frac == 0)
                m.erase(m.begin() + static_cast<std::ptrdiff_t>(i));
            else
                m[i].exp = frac;
            return normalize_term(c, std::move(m)) * pow_pos_int(base, n.get_ui());
        }
    }
    // product-to-sum on sin/cos of k*t
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Atom& ai = *m[i].base;
        if ((ai.kind != AtomKind::Sin && ai.kind != AtomKind::Cos) || m[i].exp < 1 || !is_integer(m[i].exp)) continue;
        std::string vi;
        if (!linear_single_var(ai.arg, &vi, nullptr)) continue;
        std::size_t partner = m.size();
        if (m[i].exp >= 2) {
            partner = i;
        } else {
            for (std::size_t j = i + 1; j < m.size(); ++j) {
                const Atom& aj = *m[j].base;
                if ((aj.kind != AtomKind::Sin && aj.kind != AtomKind::Cos) || m[j].exp < 1 || !is_integer(m[j].exp)) continue;
                std::string vj;
                if (linear_single_var(aj.arg, &vj, nullptr) && vj == vi) {
                    partner = j;
                    break;
                }
            }
        }
        if (partner == m.size()) continue;
        AtomPtr pi = m[i].base;
        AtomPtr pj = m[partner].base;
        m[i].exp -= 1;
        m[partner].exp -= 1;
        Monomial rest;
        rest.reserve(m.size());
        for (auto& f : m)
            if (f.exp != 0) rest.push_back(f);
        return normalize_term(c, std::move(rest)) * product_to_sum(*pi, *pj);
    }
    return single_term(c, std::move(m));
}

/// b = s * p0 with p0 primitive (integer coefficients, gcd 1). When allow_sign
/// is set the leading coefficient of p0 is made positive.
inline std::pair<Rational, Expr> primitive_part(const Expr& b, bool allow_sign) {
    mpz_class g = 0, l = 1;
    for (const auto& t : b.terms()) {
        mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), t.coeff.get_num_mpz_t());
        mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), t.coeff.get_den_mpz_t());
    }
    g = abs(g);
    Rational content(g, l);
    content.canonicalize();
    if (allow_sign && b.terms().front().coeff < 0) content = -content;
    return {content, scale(b, 1 / content)};
}

inline Expr constant_power(const Rational& c, const Rational& q) {
    if (auto r = exact_pow(c, q)) return Expr(*r);
    Rational sign = 1;
    Rational mag = c;
    if (c < 0) {
        if (q.get_den() % 2 == 0) throw EvalError("even root of a negative constant");
        mag = -c;
        if (q.get_num() % 2 != 0) sign = -1;
    }
    return normalize_term(sign, Monomial{Factor{constant_atom(mag), q}});
}

/// c * monomial representing b^q before expansion (q integer or b not a positive-int power of a sum).
inline std::pair<Rational, Monomial> raw_power(const Expr& b, const Rational& q) {
    const auto& ts = b.terms();
    if (ts.size() == 1) {
        const Term& t = ts[0];
        if (is_integer(q)) {
            Monomial m = t.mono;
            for (auto& f : m) f.exp *= q;
            return {rpow(t.coeff, q.get_num()), std::move(m)};
        }
        if (t.coeff > 0) {
            Monomial m = t.mono;
            for (auto& f : m) f.exp *= q;
            if (t.coeff != 1) m = merge(m, Monomial{Factor{constant_atom(t.coeff), q}});
            return {Rational(1), std::move(m)};
        }
    }
    const bool integral = is_integer(q);
    auto [s, p0] = primitive_part(b, integral);
    Monomial m{Factor{sum_atom(p0), q}};
    if (integral) return {rpow(s, q.get_num()), std::move(m)};
    if (s != 1) m = merge(m, Monomial{Factor{constant_atom(s), q}});
    return {Rational(1), std::move(m)};
}

} // namespace detail

inline Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return Expr();
    if (auto ca = a.constant_value()) return scale(b, *ca);
    if (auto cb = b.constant_value()) return scale(a, *cb);
    detail::Accum acc;
    acc.reserve(a.terms().size() * b.terms().size());
    for (const auto& ta : a.terms()) {
        for (const auto& tb : b.terms()) {
            Monomial m = detail::merge(ta.mono, tb.mono);
            const Rational c = ta.coeff * tb.coeff;
            bool simple = true;
            for (const auto& f : m) {
                const AtomKind k = f.base->kind;
                if (k == AtomKind::Constant || (k == AtomKind::Sum && f.exp >= 1) ||
                    ((k == AtomKind::Sin || k == AtomKind::Cos) && f.exp >= 1)) {
                    simple = false;
                    break;
                }
            }
            if (simple) {
                auto [it, inserted] = acc.try_emplace(std::move(m), c);
                if (!inserted) it->second += c;
            } else {
                detail::accumulate(acc, detail::normalize_term(c, std::move(m)));
            }
        }
    }
    return detail::finalize(std::move(acc));
}

inline Expr pow(const Expr& b, const Rational& q) {
    if (q == 0) return Expr(1);
    if (b.is_zero()) {
        if (q > 0) return Expr();
        throw EvalError("division by zero");
    }
    if (q == 1) return b;
    if (auto c = b.constant_value()) return detail::constant_power(*c, q);
    if (b.terms().size() > 1 && q > 0 && is_integer(q)) return detail::pow_pos_int(b, q.get_num().get_ui());
    auto [c, m] = detail::raw_power(b, q);
    return detail::normalize_term(c, std::move(m));
}

inline Expr pow(const Expr& b, long n) { return pow(b, Rational(n)); }
inline Expr sqrt(const Expr& b) { return pow(b, Rational(1, 2)); }

inline Expr operator/(const Expr& a, const Expr& b) {
    if (auto cb = b.constant_value()) {
        if (*cb == 0) throw EvalError("division by zero");
        return scale(a, 1 / *cb);
    }
    return a * pow(b, Rational(-1));
}

inline Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
inline Expr& operator-=(Expr& a, const Expr& b) { return a = a - b; }
inline Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

/// e * base^n with exponents merged before expansion, so that factors base^-k
/// already present in e cancel exactly.
inline Expr mul_pow(const Expr& e, const Expr& base, long n) {
    if (n == 0 || e.is_zero()) return e;
    if (base.is_zero()) throw EvalError("division by zero");
    if (base.is_constant()) return e * pow(base, Rational(n));
    auto [c, m] = detail::raw_power(base, Rational(n));
    detail::Accum acc;
    for (const auto& t : e.terms())
        detail::accumulate(acc, detail::normalize_term(t.coeff * c, detail::merge(t.mono, m)));
    return detail::finalize(std::move(acc));
}

inline Expr sin(const Expr& arg) {
    if (arg.is_zero()) return Expr();
    if (arg.terms().front().coeff < 0) return -sin(-arg);
    return detail::single_term(1, {Factor{detail::trig_atom(true, arg), 1}});
}

inline Expr cos(const Expr& arg) {
    if (arg.is_zero()) return Expr(1);
    if (arg.terms().front().coeff < 0) return cos(-arg);
    return detail::single_term(1, {Factor{detail::trig_atom(false, arg), 1}});
}

inline Expr sym(const std::string& name) { return Expr::symbol(name); }

inline Expr rat(long num, long den = 1) { return Expr(Rational(num, den)); }

// ---------------------------------------------------------------------------
// differentiation

Expr diff(const Expr& e, const std::string& var);

namespace detail {
inline Expr atom_diff(const Atom& a, const std::string& var) {
    switch (a.kind) {
    case AtomKind::Constant: return Expr();
    case AtomKind::Symbol: return a.name == var ? Expr(1) : Expr();
    case AtomKind::Jet: return a.var == var ? Expr::jet(a.name, a.var, a.order + 1) : Expr();
    case AtomKind::Sin: return cos(a.arg) * diff(a.arg, var);
    case AtomKind::Cos: return -(sin(a.arg) * diff(a.arg, var));
    case AtomKind::Sum: return diff(a.arg, var);
    }
    return Expr();
}

inline bool atom_depends(const Atom& a, const std::string& var) {
    return std::binary_search(a.free.begin(), a.free.end(), var);
}

inline Expr diff_unchecked(const Expr& e, const std::string& var) {
    if (!e.depends_on(var)) return Expr();
    Accum acc;
    for (const auto& t : e.terms()) {
        for (std::size_t i = 0; i < t.mono.size(); ++i) {
            const Factor& f = t.mono[i];
            if (!atom_depends(*f.base, var)) continue;
            Expr db = atom_diff(*f.base, var);
            if (db.is_zero()) continue;
            Monomial m = t.mono;
            m[i].exp -= 1;
            if (m[i].exp == 0) m.erase(m.begin() + static_cast<std::ptrdiff_t>(i));
            accumulate(acc, normalize_term(t.coeff * f.exp, std::move(m)) * db);
        }
    }
    return finalize(std::move(acc));
}
} // namespace detail

inline Expr diff(const Expr& e, const std::string& var) {
    if (!is_variable_name(var)) throw SymbolError("cannot differentiate with respect to unknown variable '" + var + "'");
    return detail::diff_unchecked(e, var);
}

/// n-th partial derivative, n >= 1.
inline Expr diff(const Expr& e, const std::string& var, int n) {
    if (n < 1) throw SymbolError("derivative order must be >= 1");
    Expr r = diff(e, var);
    for (int i = 1; i < n; ++i) r = detail::diff_unchecked(r, var);
    return r;
}

// ---------------------------------------------------------------------------
// substitution

using SubsMap = std::map<std::string, Expr, std::less<>>;

Expr subs(const Expr& e, const SubsMap& map);

namespace detail {
inline bool atom_touched(const Atom& a, const SubsMap& map) {
    for (const auto& s : a.free)
        if (map.count(s)) return true;
    return false;
}

inline Expr subs_atom(const Atom& a, const SubsMap& map) {
    switch (a.kind) {
    case AtomKind::Constant: return detail::single_term(1, {Factor{constant_atom(a.value), 1}});
    case AtomKind::Symbol: {
        auto it = map.find(a.name);
        return it->second;
    }
    case AtomKind::Jet: {
        auto it = map.find(a.var);
        std::string nv;
        Rational k;
        if (linear_single_var(it->second, &nv, &k) && k == 1) return Expr::jet(a.name, nv, a.order);
        throw SymbolError("cannot substitute into the argument of undetermined function " + a.name);
    }
    case AtomKind::Sin: return sin(subs(a.arg, map));
    case AtomKind::Cos: return cos(subs(a.arg, map));
    case AtomKind::Sum: return subs(a.arg, map);
    }
    return Expr();
}
} // namespace detail

inline Expr subs(const Expr& e, const SubsMap& map) {
    bool any = false;
    for (const auto& s : e.free_symbols())
        if (map.count(s)) {
            any = true;
            break;
        }
    if (!any) return e;
    detail::Accum acc;
    std::map<const Atom*, Expr> cache;
    for (const auto& t : e.terms()) {
        Monomial kept;
        Expr moved(1);
        for (const auto& f : t.mono) {
            if (!detail::atom_touched(*f.base, map)) {
                kept.push_back(f);
                continue;
            }
            auto it = cache.find(f.base.get());
            if (it == cache.end()) it = cache.emplace(f.base.get(), detail::subs_atom(*f.base, map)).first;
            moved = moved * pow(it->second, f.exp);
            if (moved.is_zero()) break;
        }
        if (moved.is_zero()) continue;
        detail::accumulate(acc, detail::normalize_term(t.coeff, std::move(kept)) * moved);
    }
    return detail::finalize(std::move(acc));
}

inline Expr subs(const Expr& e, const std::string& name, const Expr& value) { return subs(e, SubsMap{{name, value}}); }

/// Replaces every jet of `function` by the matching derivative of `replacement`
/// with respect to the jet variable.
inline Expr subs_function(const Expr& e, const std::string& function, const Expr& replacement) {
    detail::Accum acc;
    bool any = false;
    std::map<std::pair<std::string, int>, Expr> cache;
    std::function<Expr(const Expr&)> rec;
    auto atom_has = [&](const Atom& a, auto&& self) -> bool {
        if (a.kind == AtomKind::Jet) return a.name == function;
        if (a.kind == AtomKind::Sin || a.kind == AtomKind::Cos || a.kind == AtomKind::Sum) {
            for (const auto& t : a.arg.terms())
                for (const auto& f : t.mono)
                    if (self(*f.base, self)) return true;
        }
        return false;
    };
    rec = [&](const Expr& x) -> Expr {
        detail::Accum local;
        for (const auto& t : x.terms()) {
            Monomial kept;
            Expr moved(1);
            for (const auto& f : t.mono) {
                if (!atom_has(*f.base, atom_has)) {
                    kept.push_back(f);
                    continue;
                }
                any = true;
                const Atom& a = *f.base;
                Expr val;
                if (a.kind == AtomKind::Jet) {
                    auto key = std::make_pair(a.var, a.order);
                    auto it = cache.find(key);
                    if (it == cache.end()) {
                        Expr d = replacement;
                        for (int i = 0; i < a.order; ++i) d = detail::diff_unchecked(d, a.var);
                        it = cache.emplace(key, d).first;
                    }
                    val = it->second;
                } else if (a.kind == AtomKind::Sin) {
                    val = sin(rec(a.arg));
                } else if (a.kind == AtomKind::Cos) {
                    val = cos(rec(a.arg));
                } else {
                    val = rec(a.arg);
                }
                moved = moved * pow(val, f.exp);
            }
            detail::accumulate(local, detail::normalize_term(t.coeff, std::move(kept)) * moved);
        }
        return detail::finalize(std::move(local));
    };
    Expr out = rec(e);
    (void)acc;
    return any ? out : e;
}

// ---------------------------------------------------------------------------
// printing

std::string to_string(const Expr& e);

namespace detail {
inline std::string atom_str(const Atom& a) {
    switch (a.kind) {
    case AtomKind::Constant: return is_integer(a.value) ? a.value.get_str() : "(" + a.value.get_str() + ")";
    case AtomKind::Symbol: return a.name;
    case AtomKind::Jet: return a.name + std::string(static_cast<std::size_t>(a.order), '\'') + "(" + a.var + ")";
    case AtomKind::Sin: return "sin(" + to_string(a.arg) + ")";
    case AtomKind::Cos: return "cos(" + to_string(a.arg) + ")";
    case AtomKind::Sum: return "(" + to_string(a.arg) + ")";
    }
    return "?";
}

inline std::string factor_str(const Factor& f) {
    std::string s = atom_str(*f.base);
    if (f.exp == 1) return s;
    if (is_integer(f.exp) && f.exp > 0) return s + "^" + f.exp.get_str();
    return s + "^(" + f.exp.get_str() + ")";
}
} // namespace detail

inline std::string to_string(const Expr& e) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& t : e.terms()) {
        Rational c = t.coeff;
        if (first) {
            if (c < 0) {
                out += "-";
                c = -c;
            }
        } else {
            out += c < 0 ? " - " : " + ";
            if (c < 0) c = -c;
        }
        first = false;
        if (t.mono.empty()) {
            out += c.get_str();
            continue;
        }
        if (c != 1) out += c.get_str() + "*";
        for (std::size_t i = 0; i < t.mono.size(); ++i) {
            if (i) out += "*";
            out += detail::factor_str(t.mono[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// structure queries

/// Number of atoms of any kind reachable from e (size measure).
inline std::size_t term_count(const Expr& e) { return e.terms().size(); }

/// Bases of kind Sum that appear with a negative exponent, with the most negative exponent seen.
inline std::vector<std::pair<Expr, long>> negative_sum_powers(const Expr& e) {
    std::vector<std::pair<Expr, long>> out;
    for (const auto& t : e.terms()) {
        for (const auto& f : t.mono) {
            if (f.base->kind != AtomKind::Sum || f.exp >= 0) continue;
            const long need = -floor_of(f.exp).get_si();
            auto it = std::find_if(out.begin(), out.end(), [&](auto& p) { return p.first == f.base->arg; });
            if (it == out.end())
                out.emplace_back(f.base->arg, need);
            else
                it->second = std::max(it->second, need);
        }
    }
    return out;
}

/// Multiplies e by the smallest powers of its denominator sums that remove every
/// negative exponent on a sum. Returns the cleared numerator.
inline Expr clear_denominators(const Expr& e) {
    Expr out = e;
    for (const auto& [base, n] : negative_sum_powers(e)) out = mul_pow(out, base, n);
    return out;
}

} // namespace thirdint::sym

template <>
struct std::hash<thirdint::sym::Expr> {
    std::size_t operator()(const thirdint::sym::Expr& e) const noexcept { return e.hash(); }
};
