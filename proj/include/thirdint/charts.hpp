#pragma once

#include "parse.hpp"
#include "poly.hpp"

#include <array>
#include <cmath>
#include <functional>

namespace thirdint {

using sym::Expr;
using sym::Rational;

// ---------------------------------------------------------------------------
// coefficients

inline constexpr std::array<const char*, 10> kCoeffNames{"A300", "A210", "A201", "A120", "A111",
                                                         "A102", "A030", "A021", "A012", "A003"};

/// The ten leading-order constants of a third-order integral.
struct Coeffs10 {
    std::array<Rational, 10> a{};

    static Coeffs10 unit(std::string_view name) {
        Coeffs10 c;
        c[name] = 1;
        return c;
    }
    static std::size_t index(std::string_view name) {
        for (std::size_t i = 0; i < kCoeffNames.size(); ++i)
            if (name == kCoeffNames[i]) return i;
        throw SymbolError("unknown coefficient '" + std::string(name) + "'");
    }
    Rational& operator[](std::string_view name) { return a[index(name)]; }
    const Rational& operator[](std::string_view name) const { return a[index(name)]; }
    Rational& operator[](std::size_t i) { return a[i]; }
    const Rational& operator[](std::size_t i) const { return a[i]; }

    bool is_zero() const {
        return std::all_of(a.begin(), a.end(), [](const Rational& q) { return q == 0; });
    }
    Coeffs10 scaled(const Rational& s) const {
        Coeffs10 c = *this;
        for (auto& q : c.a) q *= s;
        return c;
    }
    sym::SubsMap subs_map() const {
        sym::SubsMap m;
        for (std::size_t i = 0; i < 10; ++i) m.emplace(kCoeffNames[i], Expr(a[i]));
        return m;
    }
    void bind(sym::Binding& b) const {
        for (std::size_t i = 0; i < 10; ++i) b.set(kCoeffNames[i], a[i]);
    }
    friend bool operator==(const Coeffs10& x, const Coeffs10& y) { return x.a == y.a; }
};

inline constexpr std::array<const char*, 10> kPolarNames{"A1", "A2", "A3", "A4", "B0", "B1", "B2", "C1", "C2", "D0"};

struct PolarCoeffs {
    std::array<Rational, 10> c{};

    Rational& operator[](std::string_view name) {
        for (std::size_t i = 0; i < 10; ++i)
            if (name == kPolarNames[i]) return c[i];
        throw SymbolError("unknown polar coefficient '" + std::string(name) + "'");
    }
    const Rational& operator[](std::string_view name) const { return const_cast<PolarCoeffs&>(*this)[name]; }
    friend bool operator==(const PolarCoeffs& x, const PolarCoeffs& y) { return x.c == y.c; }
};

namespace detail {
/// Rows of the Cartesian -> polar dictionary in kPolarNames order, columns in kCoeffNames order.
inline sym::RMatrix polar_matrix() {
    sym::RMatrix m(10, sym::RVector(10, Rational(0)));
    auto col = [](std::string_view n) { return Coeffs10::index(n); };
    const Rational q(1, 4), h(1, 2);
    m[0][col("A030")] = q;
    m[0][col("A012")] = -q;
    m[1][col("A021")] = q;
    m[1][col("A003")] = -q;
    m[2][col("A030")] = 3 * q;
    m[2][col("A012")] = q;
    m[3][col("A003")] = 3 * q;
    m[3][col("A021")] = q;
    m[4][col("A120")] = h;
    m[4][col("A102")] = h;
    m[5][col("A120")] = h;
    m[5][col("A102")] = -h;
    m[6][col("A111")] = h;
    m[7][col("A210")] = 1;
    m[8][col("A201")] = 1;
    m[9][col("A300")] = 1;
    return m;
}
} // namespace detail

inline PolarCoeffs cartesian_to_polar_coeffs(const Coeffs10& A) {
    const auto m = detail::polar_matrix();
    PolarCoeffs p;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) p.c[i] += m[i][j] * A[j];
    return p;
}

inline Coeffs10 polar_to_cartesian_coeffs(const PolarCoeffs& P) {
    sym::RMatrix aug = detail::polar_matrix();
    for (std::size_t i = 0; i < 10; ++i) aug[i].push_back(P.c[i]);
    const auto piv = sym::rref(aug, 10);
    if (piv.size() != 10) throw Error("polar coefficient map is singular");
    Coeffs10 A;
    for (std::size_t i = 0; i < 10; ++i) A[piv[i]] = aug[i][10];
    return A;
}

// ---------------------------------------------------------------------------
// charts

enum class ChartKind { Cartesian, Polar, Parabolic, Elliptic };

struct Chart {
    ChartKind kind;
    std::array<std::string, 2> vars;
    std::string name;

    static Chart cartesian() { return {ChartKind::Cartesian, {"x", "y"}, "cartesian"}; }
    static Chart polar() { return {ChartKind::Polar, {"r", "th"}, "polar"}; }
    static Chart parabolic() { return {ChartKind::Parabolic, {"xi", "eta"}, "parabolic"}; }
    static Chart elliptic() { return {ChartKind::Elliptic, {"u", "v"}, "elliptic"}; }

    static Chart of(ChartKind k) {
        switch (k) {
        case ChartKind::Cartesian: return cartesian();
        case ChartKind::Polar: return polar();
        case ChartKind::Parabolic: return parabolic();
        case ChartKind::Elliptic: return elliptic();
        }
        return cartesian();
    }
    static Chart from_name(std::string_view n) {
        for (auto k : {ChartKind::Cartesian, ChartKind::Polar, ChartKind::Parabolic, ChartKind::Elliptic})
            if (of(k).name == n) return of(k);
        throw SymbolError("unknown chart '" + std::string(n) + "'");
    }
};

using Point2 = std::array<double, 2>;

/// Throws DomainError when q is outside the chart's stated domain.
inline void check_domain(const Chart& c, const Point2& q) {
    switch (c.kind) {
    case ChartKind::Cartesian: return;
    case ChartKind::Polar:
        if (!(q[0] > 0)) throw DomainError("polar chart requires r > 0");
        return;
    case ChartKind::Parabolic:
        if (!(q[0] * q[0] + q[1] * q[1] > 0)) throw DomainError("parabolic chart requires xi^2 + eta^2 > 0");
        return;
    case ChartKind::Elliptic:
        if (!(q[0] >= -1 && q[0] <= 1)) throw DomainError("elliptic chart requires -1 <= u <= 1");
        if (!(q[1] >= 1)) throw DomainError("elliptic chart requires v >= 1");
        return;
    }
}

inline Point2 to_cartesian(const Chart& c, const Point2& q) {
    check_domain(c, q);
    switch (c.kind) {
    case ChartKind::Cartesian: return q;
    case ChartKind::Polar: return {q[0] * std::cos(q[1]), q[0] * std::sin(q[1])};
    case ChartKind::Parabolic: return {(q[0] * q[0] - q[1] * q[1]) / 2, q[0] * q[1]};
    case ChartKind::Elliptic: return {q[0] * q[1], std::sqrt(1 - q[0] * q[0]) * std::sqrt(q[1] * q[1] - 1)};
    }
    return q;
}

/// Inverse map on the chart's image (elliptic: x2 >= 0; parabolic: xi > 0).
inline Point2 from_cartesian(const Chart& c, const Point2& x) {
    switch (c.kind) {
    case ChartKind::Cartesian: return x;
    case ChartKind::Polar: return {std::hypot(x[0], x[1]), std::atan2(x[1], x[0])};
    case ChartKind::Parabolic: {
        const double xi = std::sqrt(std::hypot(x[0], x[1]) + x[0]);
        if (xi == 0) return {0.0, std::sqrt(2 * std::fabs(x[0]))};
        return {xi, x[1] / xi};
    }
    case ChartKind::Elliptic: {
        if (x[1] < 0) throw DomainError("elliptic chart covers x2 >= 0 only");
        const double rp = std::hypot(x[0] + 1, x[1]);
        const double rm = std::hypot(x[0] - 1, x[1]);
        return {(rp - rm) / 2, (rp + rm) / 2};
    }
    }
    return x;
}

inline Expr var(const Chart& c, int i) { return sym::sym(c.vars[static_cast<std::size_t>(i)]); }

/// (x1, x2) as expressions in the chart variables.
inline std::array<Expr, 2> cartesian_exprs(const Chart& c) {
    using sym::parse;
    switch (c.kind) {
    case ChartKind::Cartesian: return {parse("x"), parse("y")};
    case ChartKind::Polar: return {parse("r*cos(th)"), parse("r*sin(th)")};
    case ChartKind::Parabolic: return {parse("(xi^2 - eta^2)/2"), parse("xi*eta")};
    case ChartKind::Elliptic: return {parse("u*v"), parse("(1 - u^2)^(1/2)*(v^2 - 1)^(1/2)")};
    }
    return {};
}

/// M[i][a] = d q_a / d x_i, expressed in the chart variables.
inline std::array<std::array<Expr, 2>, 2> inverse_jacobian(const Chart& c) {
    using sym::parse;
    switch (c.kind) {
    case ChartKind::Cartesian: return {{{Expr(1), Expr(0)}, {Expr(0), Expr(1)}}};
    case ChartKind::Polar: return {{{parse("cos(th)"), parse("-sin(th)/r")}, {parse("sin(th)"), parse("cos(th)/r")}}};
    case ChartKind::Parabolic:
        return {{{parse("xi/(xi^2 + eta^2)"), parse("-eta/(xi^2 + eta^2)")},
                 {parse("eta/(xi^2 + eta^2)"), parse("xi/(xi^2 + eta^2)")}}};
    case ChartKind::Elliptic:
        return {{{parse("v*(1 - u^2)/(v^2 - u^2)"), parse("u*(v^2 - 1)/(v^2 - u^2)")},
                 {parse("u*(1 - u^2)^(1/2)*(v^2 - 1)^(1/2)/(u^2 - v^2)"),
                  parse("-v*(1 - u^2)^(1/2)*(v^2 - 1)^(1/2)/(u^2 - v^2)")}}};
    }
    return {};
}

/// Chart variables as expressions in x1, x2 (principal branches on the chart image).
inline std::array<Expr, 2> chart_exprs_in_cartesian(const Chart& c) {
    using sym::parse;
    switch (c.kind) {
    case ChartKind::Cartesian: return {parse("x1"), parse("x2")};
    case ChartKind::Polar: return {parse("(x1^2 + x2^2)^(1/2)"), Expr()};
    case ChartKind::Parabolic: {
        Expr xi = parse("((x1^2 + x2^2)^(1/2) + x1)^(1/2)");
        return {xi, sym::sym("x2") / xi};
    }
    case ChartKind::Elliptic: {
        Expr rp = parse("((x1 + 1)^2 + x2^2)^(1/2)");
        Expr rm = parse("((x1 - 1)^2 + x2^2)^(1/2)");
        return {sym::scale(rp - rm, Rational(1, 2)), sym::scale(rp + rm, Rational(1, 2))};
    }
    }
    return {};
}

namespace detail {

/// Replaces sin(k th), cos(k th) by polynomials in x1/r, x2/r.
inline Expr angle_to_cartesian(const Expr& e) {
    if (!e.depends_on("th")) return e;
    const Expr r = sym::parse("(x1^2 + x2^2)^(1/2)");
    const Expr c = sym::sym("x1") / r;
    const Expr s = sym::sym("x2") / r;
    Expr out;
    for (const auto& t : e.terms()) {
        Expr term = sym::detail::single_term(t.coeff, {});
        for (const auto& f : t.mono) {
            const sym::Atom& a = *f.base;
            Expr base;
            if (a.kind == sym::AtomKind::Sin || a.kind == sym::AtomKind::Cos) {
                std::string v;
                Rational k;
                if (!sym::detail::linear_single_var(a.arg, &v, &k) || v != "th" || !sym::is_integer(k))
                    throw SymbolError("angular dependence not expressible in Cartesian variables: " + sym::to_string(e));
                // (c + i s)^k
                Expr re(1), im(0);
                long n = k.get_num().get_si();
                for (long i = 0; i < n; ++i) {
                    Expr nre = re * c - im * s;
                    im = re * s + im * c;
                    re = nre;
                }
                base = a.kind == sym::AtomKind::Sin ? im : re;
            } else if (std::binary_search(a.free.begin(), a.free.end(), std::string("th"))) {
                throw SymbolError("angular dependence not expressible in Cartesian variables: " + sym::to_string(e));
            } else {
                base = sym::detail::single_term(1, {sym::Factor{f.base, 1}});
            }
            term = term * sym::pow(base, f.exp);
        }
        out += term;
    }
    return out;
}

} // namespace detail

/// Rewrites an expression in the chart variables as a function of x1, x2.
inline Expr to_cartesian_expr(const Chart& c, const Expr& e) {
    if (c.kind == ChartKind::Cartesian) return sym::subs(e, {{"x", sym::sym("x1")}, {"y", sym::sym("x2")}});
    const auto q = chart_exprs_in_cartesian(c);
    if (c.kind == ChartKind::Polar) return sym::subs(detail::angle_to_cartesian(e), {{"r", q[0]}});
    return sym::subs(e, {{c.vars[0], q[0]}, {c.vars[1], q[1]}});
}

// ---------------------------------------------------------------------------
// leading terms

struct LeadingTerms {
    std::array<Expr, 4> F;
    std::array<Expr, 4> Fhat;  // elliptic numerators, F = Fhat / (u^2 - v^2)^3; empty otherwise
};

namespace detail {

inline std::array<std::string, 4> cartesian_F_text() {
    return {"-A300*x2^3 + A210*x2^2 - A120*x2 + A030",
            "3*A300*x1*x2^2 - 2*A210*x1*x2 + A201*x2^2 + A120*x1 - A111*x2 + A021",
            "-3*A300*x1^2*x2 - 2*A201*x1*x2 + A210*x1^2 + A111*x1 - A102*x2 + A012",
            "A300*x1^3 + A201*x1^2 + A102*x1 + A003"};
}

inline std::array<std::string, 4> polar_F_text() {
    return {"A1*cos(3*th) + A2*sin(3*th) + A3*cos(th) + A4*sin(th)",
            "(-3*A1*sin(3*th) + 3*A2*cos(3*th) - A3*sin(th) + A4*cos(th))/r + B1*cos(2*th) + B2*sin(2*th) + B0",
            "(-3*A1*cos(3*th) - 3*A2*sin(3*th) + A3*cos(th) + A4*sin(th))/r^2"
            " + (-2*B1*sin(2*th) + 2*B2*cos(2*th))/r + C1*cos(th) + C2*sin(th)",
            "(A1*sin(3*th) - A2*cos(3*th) - A3*sin(th) + A4*cos(th))/r^3"
            " - (B1*cos(2*th) + B2*sin(2*th) - B0)/r^2 - (C1*sin(th) - C2*cos(th))/r + D0"};
}

inline std::array<std::string, 4> parabolic_F_text() {
    return {
        "-eta^3*A300/8 + eta^2*(xi*A210 + eta*A201)/(4*(xi^2 + eta^2))"
        " - (xi^2*eta*A120 + eta^2*xi*A111 + eta^3*A102)/(2*(xi^2 + eta^2)^2)"
        " + (xi^3*A030 + xi^2*eta*A021 + eta^2*xi*A012 + eta^3*A003)/(xi^2 + eta^2)^3",

        "3*eta^2*xi*A300/8 - (eta*(eta^2 + 2*xi^2)*A210 + eta^2*xi*A201)/(4*(xi^2 + eta^2))"
        " + (xi*(2*eta^2 + xi^2)*A120 + eta^3*A111 - eta^2*xi*A102)/(2*(xi^2 + eta^2)^2)"
        " - (3*xi^2*eta*A030 + xi*(2*eta^2 - xi^2)*A021 + eta*(eta^2 - 2*xi^2)*A012 - 3*eta^2*xi*A003)/(xi^2 + eta^2)^3",

        "-3*eta*xi^2*A300/8 + (xi*(2*eta^2 + xi^2)*A210 - eta*xi^2*A201)/(4*(xi^2 + eta^2))"
        " + (xi^3*A111 + eta*xi^2*A102 - eta*(eta^2 + 2*xi^2)*A120)/(2*(xi^2 + eta^2)^2)"
        " + (3*eta^2*xi*A030 + eta*(eta^2 - 2*xi^2)*A021 + xi*(xi^2 - 2*eta^2)*A012 + 3*eta*xi^2*A003)/(xi^2 + eta^2)^3",

        "xi^3*A300/8 + (xi^3*A201 - eta*xi^2*A210)/(4*(xi^2 + eta^2))"
        " + (eta^2*xi*A120 - eta*xi^2*A111 + xi^3*A102)/(2*(xi^2 + eta^2)^2)"
        " + (xi^3*A003 + eta^2*xi*A021 - eta*xi^2*A012 - eta^3*A030)/(xi^2 + eta^2)^3"};
}

inline std::array<std::string, 4> elliptic_Fhat_text() {
    return {
        "(1 - u^2)^(3/2)*(v^2 - 1)^(3/2)*(v^3*A300 + u*v^2*A201 + u^2*v*A102 + u^3*A003)"
        " + (1 - u^2)^(5/2)*(v^2 - 1)^(1/2)*(v^3*A120 + u*v^2*A021)"
        " - (1 - u^2)^2*(v^2 - 1)*(v^3*A210 + u*v^2*A111 + u^2*v*A012)"
        " - (1 - u^2)^3*v^3*A030",

        "-(1 - u^2)^(3/2)*(v^2 - 1)^(3/2)*(3*u*v^2*A300 + v*(2*u^2 + v^2)*A201 + u*(u^2 + 2*v^2)*A102 + 3*u^2*v*A003)"
        " + (1 - u^2)^(3/2)*(v^2 - 1)^(1/2)*((u^2 + 2*v^2 - 3)*u*v^2*A120 + v*(3*u^2*v^2 - 2*u^2 - v^2)*A021)"
        " - (1 - u^2)*(v^2 - 1)*(v^2*u*(2*u^2 + v^2 - 3)*A210 + v*(u^4 + 2*u^2*v^2 - 2*u^2 - v^2)*A111"
        " + u*(3*u^2*v^2 - u^2 - 2*v^2)*A012)"
        " - 3*(1 - u^2)^2*(v^2 - 1)*u*v^2*A030",

        "(1 - u^2)^(3/2)*(v^2 - 1)^(3/2)*(3*u^2*v*A300 + u*(u^2 + 2*v^2)*A201 + v*(2*u^2 + v^2)*A102 + 3*u*v^2*A003)"
        " + (1 - u^2)^(1/2)*(v^2 - 1)^(3/2)*((2*u^2 + v^2 - 3)*u^2*v*A120 + u*(3*u^2*v^2 - u^2 - 2*v^2)*A021)"
        " + (1 - u^2)*(v^2 - 1)*(u^2*v*(u^2 + 2*v^2 - 3)*A210 + u*(v^4 + 2*u^2*v^2 - u^2 - 2*v^2)*A111"
        " + v*(3*u^2*v^2 - 2*u^2 - v^2)*A012)"
        " - 3*(1 - u^2)*(v^2 - 1)^2*u^2*v*A030",

        "-(1 - u^2)^(3/2)*(v^2 - 1)^(3/2)*(u^3*A300 + u^2*v*A201 + u*v^2*A102 + v^3*A003)"
        " - (1 - u^2)^(1/2)*(v^2 - 1)^(5/2)*(u^3*A120 + u^2*v*A021)"
        " - (1 - u^2)*(v^2 - 1)^2*(u^3*A210 + u^2*v*A111 + u*v^2*A012)"
        " - (v^2 - 1)^3*u^3*A030"};
}

inline sym::SubsMap polar_dictionary_symbolic() {
    const auto m = polar_matrix();
    sym::SubsMap out;
    for (std::size_t i = 0; i < 10; ++i) {
        Expr e;
        for (std::size_t j = 0; j < 10; ++j)
            if (m[i][j] != 0) e += sym::scale(sym::sym(kCoeffNames[j]), m[i][j]);
        out.emplace(kPolarNames[i], e);
    }
    return out;
}

} // namespace detail

/// Leading terms with the ten coefficients left as parameters A300 ... A003.
inline LeadingTerms leading_terms_symbolic(const Chart& c) {
    LeadingTerms lt;
    switch (c.kind) {
    case ChartKind::Cartesian: {
        const auto text = detail::cartesian_F_text();
        for (int j = 0; j < 4; ++j)
            lt.F[j] = sym::subs(sym::parse(text[j]), {{"x1", sym::sym("x")}, {"x2", sym::sym("y")}});
        break;
    }
    case ChartKind::Polar: {
        const auto text = detail::polar_F_text();
        const auto dict = detail::polar_dictionary_symbolic();
        for (int j = 0; j < 4; ++j) lt.F[j] = sym::subs(sym::parse(text[j]), dict);
        break;
    }
    case ChartKind::Parabolic: {
        const auto text = detail::parabolic_F_text();
        for (int j = 0; j < 4; ++j) lt.F[j] = sym::parse(text[j]);
        break;
    }
    case ChartKind::Elliptic: {
        const auto text = detail::elliptic_Fhat_text();
        const Expr den = sym::parse("u^2 - v^2");
        for (int j = 0; j < 4; ++j) {
            lt.Fhat[j] = sym::parse(text[j]);
            lt.F[j] = sym::mul_pow(lt.Fhat[j], den, -3);
        }
        break;
    }
    }
    return lt;
}

/// Cartesian reference leading terms in x1, x2.
inline std::array<Expr, 4> cartesian_reference_F() {
    const auto text = detail::cartesian_F_text();
    return {sym::parse(text[0]), sym::parse(text[1]), sym::parse(text[2]), sym::parse(text[3])};
}

inline LeadingTerms leading_terms(const Chart& c, const Coeffs10& A) {
    const LeadingTerms s = leading_terms_symbolic(c);
    const auto m = A.subs_map();
    LeadingTerms lt;
    for (int j = 0; j < 4; ++j) {
        lt.F[j] = sym::subs(s.F[j], m);
        if (c.kind == ChartKind::Elliptic) lt.Fhat[j] = sym::subs(s.Fhat[j], m);
    }
    return lt;
}

// ---------------------------------------------------------------------------
// potentials and Hamiltonians

/// Values and first three derivatives of a one-variable function at a point.
using Jet4 = std::array<double, 4>;
using SampledComponent = std::function<Jet4(double)>;

/// One separated potential component: an expression in the chart variable or a sampled field.
struct Component {
    std::optional<Expr> expr;
    SampledComponent sampled;

    Component() : expr(Expr()) {}
    Component(Expr e) : expr(std::move(e)) {}  // NOLINT(google-explicit-constructor)
    Component(SampledComponent s) : sampled(std::move(s)) {}  // NOLINT(google-explicit-constructor)
    bool is_symbolic() const { return expr.has_value(); }
};

struct SeparablePotential {
    Chart chart = Chart::cartesian();
    Component c1;
    Component c2;
    sym::Binding params;

    /// Throws when a symbolic component depends on the other chart variable.
    void validate() const {
        for (int i = 0; i < 2; ++i) {
            const Component& c = i == 0 ? c1 : c2;
            if (!c.expr) continue;
            for (const auto& s : c.expr->free_symbols())
                if (sym::is_variable_name(s) && s != chart.vars[static_cast<std::size_t>(i)])
                    throw SymbolError("component " + std::to_string(i + 1) + " depends on '" + s + "'");
        }
    }
};

/// V in the chart variables, assembled per chart.
inline Expr chart_potential(const SeparablePotential& W) {
    W.validate();
    if (!W.c1.expr || !W.c2.expr) throw PreconditionError("sampled components have no symbolic potential");
    const Expr& a = *W.c1.expr;
    const Expr& b = *W.c2.expr;
    switch (W.chart.kind) {
    case ChartKind::Cartesian: return a + b;
    case ChartKind::Polar: return a + b * sym::parse("r^(-2)");
    case ChartKind::Parabolic: return (a + b) * sym::parse("(xi^2 + eta^2)^(-1)");
    case ChartKind::Elliptic: return (a + b) * sym::parse("(u^2 - v^2)^(-1)");
    }
    return Expr();
}

struct Hamiltonian {
    Expr kinetic;    // (p1^2 + p2^2)/2
    Expr potential;  // in x1, x2
    Expr potential_chart;
    Expr total() const { return kinetic + potential; }
};

inline Hamiltonian hamiltonian(const Chart& c, const SeparablePotential& W) {
    if (W.chart.kind != c.kind) throw PreconditionError("potential chart does not match");
    Hamiltonian h;
    h.kinetic = sym::parse("(p1^2 + p2^2)/2");
    h.potential_chart = chart_potential(W);
    h.potential = to_cartesian_expr(c, h.potential_chart);
    return h;
}

/// The classical second-order integral responsible for separation, in Cartesian phase space.
inline Expr second_order_integral(const SeparablePotential& W) {
    W.validate();
    using sym::parse;
    const Chart& c = W.chart;
    const Expr& a = *W.c1.expr;
    const Expr& b = *W.c2.expr;
    const Expr L3 = parse("x1*p2 - x2*p1");
    switch (c.kind) {
    case ChartKind::Cartesian: return parse("p1^2/2") + to_cartesian_expr(c, a);
    case ChartKind::Polar: return sym::scale(L3 * L3, Rational(1, 2)) + to_cartesian_expr(c, b);
    case ChartKind::Parabolic:
        return parse("p2") * L3 + to_cartesian_expr(c, (parse("xi^2") * b - parse("eta^2") * a) * parse("(xi^2 + eta^2)^(-1)"));
    case ChartKind::Elliptic:
        return L3 * L3 + parse("(p1^2 - p2^2)/2") +
               to_cartesian_expr(c, (parse("2*v^2 - 1") * a + parse("2*u^2 - 1") * b) * parse("(u^2 - v^2)^(-1)"));
    }
    return Expr();
}

} // namespace thirdint
