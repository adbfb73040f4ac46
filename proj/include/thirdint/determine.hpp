#pragma once

#include "charts.hpp"

#include <random>

namespace thirdint {

// ---------------------------------------------------------------------------
// Cartesian determining equations

namespace detail {

inline Expr cartesian_vars(const Expr& e) {
    if (!e.depends_on("x") && !e.depends_on("y")) return e;
    return sym::subs(e, {{"x", sym::sym("x1")}, {"y", sym::sym("x2")}});
}

inline void reject_momenta(const Expr& e, const char* what) {
    for (const char* p : {"p1", "p2"})
        if (e.depends_on(p)) throw SymbolError(std::string(what) + " depends on momentum " + p);
}

} // namespace detail

/// The potential of W rewritten in x1, x2.
inline Expr cartesian_potential(const SeparablePotential& W) { return to_cartesian_expr(W.chart, chart_potential(W)); }

struct GResiduals {
    std::array<Expr, 3> r;
    bool all_zero() const { return r[0].is_zero() && r[1].is_zero() && r[2].is_zero(); }
};

/// Residuals of the three second-order determining equations.
inline GResiduals g_residuals(const Expr& V_in, const Coeffs10& A, const Expr& g1_in, const Expr& g2_in) {
    detail::reject_momenta(g1_in, "g1");
    detail::reject_momenta(g2_in, "g2");
    const Expr V = detail::cartesian_vars(V_in);
    const Expr g1 = detail::cartesian_vars(g1_in);
    const Expr g2 = detail::cartesian_vars(g2_in);
    const auto Fs = cartesian_reference_F();
    const auto m = A.subs_map();
    const Expr F1 = sym::subs(Fs[0], m), F2 = sym::subs(Fs[1], m), F3 = sym::subs(Fs[2], m), F4 = sym::subs(Fs[3], m);
    const Expr V1 = sym::diff(V, "x1"), V2 = sym::diff(V, "x2");
    GResiduals out;
    out.r[0] = sym::diff(g1, "x1") - (Expr(3) * F1 * V1 + F2 * V2);
    out.r[1] = sym::diff(g1, "x2") + sym::diff(g2, "x1") - Expr(2) * (F2 * V1 + F3 * V2);
    out.r[2] = sym::diff(g2, "x2") - (F3 * V1 + Expr(3) * F4 * V2);
    return out;
}

inline GResiduals g_residuals(const SeparablePotential& W, const Coeffs10& A, const Expr& g1, const Expr& g2) {
    return g_residuals(cartesian_potential(W), A, g1, g2);
}

/// Right-hand side of the zeroth-order determining equation (zero for a valid candidate).
inline Expr zeroth_residual(const Expr& V_in, const Coeffs10& A, const Expr& g1_in, const Expr& g2_in,
                            const Expr& hbar) {
    detail::reject_momenta(g1_in, "g1");
    detail::reject_momenta(g2_in, "g2");
    const Expr V = detail::cartesian_vars(V_in);
    const Expr g1 = detail::cartesian_vars(g1_in);
    const Expr g2 = detail::cartesian_vars(g2_in);
    const auto Fs = cartesian_reference_F();
    const auto m = A.subs_map();
    const Expr h2 = hbar * hbar;
    const Expr x1 = sym::sym("x1"), x2 = sym::sym("x2");
    const Expr V1 = sym::diff(V, "x1"), V2 = sym::diff(V, "x2");
    const Expr V11 = sym::diff(V1, "x1"), V22 = sym::diff(V2, "x2");
    const Expr a1 = g1 - h2 * (Expr(-2) * Expr(A["A300"]) * x2 + Expr(A["A210"] / 2));
    const Expr a2 = g2 - h2 * (Expr(2) * Expr(A["A300"]) * x1 + Expr(A["A201"] / 2));
    const Expr third = sym::subs(Fs[0], m) * sym::diff(V11, "x1") + sym::subs(Fs[1], m) * sym::diff(V11, "x2") +
                       sym::subs(Fs[2], m) * sym::diff(V22, "x1") + sym::subs(Fs[3], m) * sym::diff(V22, "x2");
    return a1 * V1 + a2 * V2 - sym::scale(h2, Rational(1, 4)) * third;
}

inline Expr zeroth_residual(const SeparablePotential& W, const Coeffs10& A, const Expr& g1, const Expr& g2,
                            const Expr& hbar) {
    return zeroth_residual(cartesian_potential(W), A, g1, g2, hbar);
}

namespace detail {

inline const char* eq7_template_text() {
    return "-F3*V_111 + (2*F2 - 3*F4)*V_112 + (-3*F1 + 2*F3)*V_122 - F2*V_222"
           " + 2*(F2_2 - F3_1)*V_11 + 2*(-3*F1_2 + F2_1 + F3_2 - 3*F4_1)*V_12 + 2*(-F2_2 + F3_1)*V_22"
           " + (-3*F1_22 + 2*F2_12 - F3_11)*V_1 + (-F2_22 + 2*F3_12 - 3*F4_11)*V_2";
}

/// F-derivative symbol names used by the templates: F{j}, F{j}_{a}, F{j}_{a}{b}.
inline sym::SubsMap f_symbol_map(const std::array<Expr, 4>& F, const std::array<std::string, 2>& vars,
                                 const std::array<std::string, 2>& labels) {
    sym::SubsMap m;
    for (int j = 0; j < 4; ++j) {
        const std::string base = "F" + std::to_string(j + 1);
        m.emplace(base, F[j]);
        for (int a = 0; a < 2; ++a) {
            const Expr da = sym::diff(F[j], vars[a]);
            m.emplace(base + "_" + labels[a], da);
            for (int b = 0; b < 2; ++b) m.emplace(base + "_" + labels[a] + labels[b], sym::diff(da, vars[b]));
        }
    }
    return m;
}

inline sym::SubsMap v_symbol_map(const Expr& V) {
    sym::SubsMap m;
    const std::array<std::string, 2> xs{"x1", "x2"};
    const Expr d1 = sym::diff(V, "x1"), d2 = sym::diff(V, "x2");
    m.emplace("V_1", d1);
    m.emplace("V_2", d2);
    const Expr d11 = sym::diff(d1, "x1"), d12 = sym::diff(d1, "x2"), d22 = sym::diff(d2, "x2");
    m.emplace("V_11", d11);
    m.emplace("V_12", d12);
    m.emplace("V_22", d22);
    m.emplace("V_111", sym::diff(d11, "x1"));
    m.emplace("V_112", sym::diff(d11, "x2"));
    m.emplace("V_122", sym::diff(d22, "x1"));
    m.emplace("V_222", sym::diff(d22, "x2"));
    return m;
}

} // namespace detail

/// The general linear compatibility condition of the second-order determining equations.
inline Expr linear_compat(const Expr& V_in, const Coeffs10& A) {
    const Expr V = detail::cartesian_vars(V_in);
    const auto Fs = cartesian_reference_F();
    const auto m = A.subs_map();
    std::array<Expr, 4> F{sym::subs(Fs[0], m), sym::subs(Fs[1], m), sym::subs(Fs[2], m), sym::subs(Fs[3], m)};
    sym::SubsMap all = detail::f_symbol_map(F, {"x1", "x2"}, {"1", "2"});
    for (auto& [k, v] : detail::v_symbol_map(V)) all.emplace(k, v);
    return sym::subs(sym::parse(detail::eq7_template_text()), all);
}

// ---------------------------------------------------------------------------
// chart-specific compatibility conditions

/// Names of the two unknown component functions in each chart.
inline std::array<std::string, 2> component_names(const Chart& c) {
    switch (c.kind) {
    case ChartKind::Cartesian: return {"V1", "V2"};
    case ChartKind::Polar: return {"R", "S"};
    case ChartKind::Parabolic:
    case ChartKind::Elliptic: return {"W1", "W2"};
    }
    return {"W1", "W2"};
}

namespace detail {

inline std::array<std::string, 2> derivative_labels(const Chart& c) { return c.vars; }

inline std::string compat_template_text(const Chart& c) {
    switch (c.kind) {
    case ChartKind::Cartesian:
        return "-F3*V1'''(x) - 4*F3_x*V1''(x) - 6*F3_xx*V1'(x)"
               " - (F2*V2'''(y) + 4*F2_y*V2''(y) + 6*F2_yy*V2'(y))";
    case ChartKind::Polar:
        return "r^4*F3*R'''(r) + r*(4*r^3*F3_r + 6*r^2*F3 + 3*F1)*R''(r)"
               " + (6*r^4*F3_rr + 20*r^3*F3_r + 6*r^2*F3 - 3*F1)*R'(r)"
               " + r^(-2)*(F2*S'''(th) + 4*F2_th*S''(th) + (6*F2_thth - 6*F2_r*r + 4*F2)*S'(th)"
               " + (12*r*F2_thr - 8*F2_th)*S(th)) - 36*r^(-3)*F1*S(th)";
    case ChartKind::Parabolic:
        return "F3*W1'''(xi) + (4*F3_xi + (F3 + 3*F1)*xi*(xi^2 + eta^2)^(-1))*W1''(xi)"
               " + (6*F3_xixi + (xi^2 + eta^2)^(-1)*(6*xi*F3_xi - 6*eta*F3_eta + 12*xi*F1_xi - 3*(F3 - 3*F1)))*W1'(xi)"
               " + C1*W1(xi)"
               " + F2*W2'''(eta) + (4*F2_eta + (F2 + 3*F4)*eta*(xi^2 + eta^2)^(-1))*W2''(eta)"
               " + (6*F2_etaeta + (xi^2 + eta^2)^(-1)*(6*(eta*F2_eta - xi*F2_xi + 2*eta*F4_eta) - 3*(F2 - 3*F4)))*W2'(eta)"
               " + C2*W2(eta)";
    case ChartKind::Elliptic:
        return "F3*(1 - u^2)/(v^2 - 1)*W1'''(u)"
               " + (4*(1 - u^2)*F3_u/(v^2 - 1) - u*(F3 - 3*F1)/(u^2 - v^2))*W1''(u)"
               " + (6*F3_uu*(1 - u^2)/(v^2 - 1)"
               " + (-2*u*(2*u^2 + v^2 - 3)*F3_u + 6*(v^2 - 1)*(v*F3_v + 2*u*F1_u))/((v^2 - 1)*(u^2 - v^2))"
               " + ((u^2*v^2 + 11*u^2 - 9*v^2 - 3)*F3 + 3*(5*u^2 + 3)*(v^2 - 1)*F1)/((1 - u^2)*(v^2 - 1)*(u^2 - v^2)))*W1'(u)"
               " + C1*W1(u)"
               " + F2*(v^2 - 1)/(1 - u^2)*W2'''(v)"
               " + (4*(v^2 - 1)*F2_v/(1 - u^2) + v*(F2 - 3*F4)/(u^2 - v^2))*W2''(v)"
               " + (6*F2_vv*(v^2 - 1)/(1 - u^2)"
               " - (2*v*(u^2 + 2*v^2 - 3)*F2_v + 6*(1 - u^2)*(u*F2_u + 2*v*F4_v))/((1 - u^2)*(u^2 - v^2))"
               " - ((u^2*v^2 + 11*v^2 - 9*u^2 - 3)*F2 - 3*(5*v^2 + 3)*(1 - u^2)*F4)/((1 - u^2)*(v^2 - 1)*(u^2 - v^2)))*W2'(v)"
               " + C2*W2(v)";
    }
    return "0";
}

inline std::pair<std::string, std::string> c12_text(const Chart& c) {
    if (c.kind == ChartKind::Parabolic) {
        return {
            "-(12*xi*F3_xixi - 12*eta*F3_etaxi + 12*eta^(-1)*(2*eta^2 - xi^2)*F1_xieta)/(xi^2 + eta^2)"
            " - (24*(xi^2 - eta^2)*F3_xi - 24*xi*eta*F3_eta + 12*eta^(-2)*(4*eta^4 - 2*eta^2*xi^2 + xi^4)*F1_xi"
            " + 12*(4*eta^2 - 3*xi^2)*xi*eta^(-1)*F1_eta)/(xi^2 + eta^2)^2"
            " - 12*xi*(2*eta^4*F3 + 3*(xi^4 - xi^2*eta^2)*F1)/(eta^2*(xi^2 + eta^2)^3)",

            "-(12*eta*F2_etaeta - 12*xi*F2_etaxi + 12*xi^(-1)*(2*xi^2 - eta^2)*F4_xieta)/(xi^2 + eta^2)"
            " + (24*(xi^2 - eta^2)*F2_eta + 24*xi*eta*F2_xi - 12*xi^(-2)*(4*xi^4 - 2*eta^2*xi^2 + eta^4)*F4_eta"
            " - 12*(4*xi^2 - 3*eta^2)*xi^(-1)*eta*F4_xi)/(xi^2 + eta^2)^2"
            " - 12*eta*(2*xi^4*F2 + 3*(eta^4 - xi^2*eta^2)*F4)/(xi^2*(xi^2 + eta^2)^3)"};
    }
    return {
        "-12*u*(1 - u^2)*F3_uu/((v^2 - 1)*(u^2 - v^2))"
        " - 12*v*F3_vu/(u^2 - v^2)"
        " + 4*(4*u^4 + 7*u^2*v^2 + v^4 - 6*u^2 - 6*v^2)*F3_u/((u^2 - v^2)^2*(v^2 - 1))"
        " + 12*v*u*(u^2 + v^2 - 2)*F3_v/((u^2 - v^2)^2*(1 - u^2))"
        " - 4*u*(u^4*v^2 - 8*u^2*v^4 + v^6 + 5*u^4 - 4*u^2*v^2 + 11*v^4 - 6*v^2)*F3/((u^2 - v^2)^3*(1 - u^2)*(v^2 - 1))"
        " + 12*(2*u^2*v^2 + v^4 - u^2 - 2*v^2)*F1_vu/((u^2 - v^2)*(1 - u^2)*v)"
        " - 12*(2*u^4*v^4 + 4*u^2*v^6 + v^8 - 2*u^4*v^2 - 8*u^2*v^4 - 4*v^6 + u^4 + 2*u^2*v^2 + 4*v^4)*F1_u"
        "/((u^2 - v^2)^2*(1 - u^2)*(v^2 - 1)*v^2)"
        " - 12*u*(4*u^2*v^4 + 3*v^6 - 7*u^2*v^2 - 7*v^4 + 3*u^2 + 4*v^2)*F1_v/((u^2 - v^2)^2*(1 - u^2)^2*v)"
        " + 12*u*(2*u^6*v^2 - 4*u^4*v^4 + 5*u^2*v^6 + 3*v^8 - 5*u^4*v^2 - 2*u^2*v^4 - 5*v^6 + 3*u^4 + 3*u^2*v^2)*F1"
        "/((u^2 - v^2)^3*(1 - u^2)^2*v^2)",

        "12*v*(v^2 - 1)*F2_vv/((1 - u^2)*(u^2 - v^2))"
        " + 12*u*F2_vu/(u^2 - v^2)"
        " - 4*(u^4 + 7*u^2*v^2 + 4*v^4 - 6*u^2 - 6*v^2)*F2_v/((u^2 - v^2)^2*(1 - u^2))"
        " - 12*v*u*(u^2 + v^2 - 2)*F2_u/((u^2 - v^2)^2*(v^2 - 1))"
        " + 4*v*(u^6 - 8*u^4*v^2 + u^2*v^4 + 11*u^4 - 4*u^2*v^2 + 5*v^4 - 6*u^2)*F2/((u^2 - v^2)^3*(1 - u^2)*(v^2 - 1))"
        " + 12*(u^4 + 2*u^2*v^2 - 2*u^2 - v^2)*F4_vu/((u^2 - v^2)*(v^2 - 1)*u)"
        " - 12*(u^8 + 4*u^6*v^2 + 2*u^4*v^4 - 4*u^6 - 8*u^4*v^2 - 2*u^2*v^4 + 4*u^4 + 2*u^2*v^2 + v^4)*F4_v"
        "/((u^2 - v^2)^2*(1 - u^2)*(v^2 - 1)*u^2)"
        " - 12*v*(3*u^6 + 4*u^4*v^2 - 7*u^4 - 7*u^2*v^2 + 4*u^2 + 3*v^2)*F4_u/((u^2 - v^2)^2*(v^2 - 1)^2*u)"
        " - 12*v*(3*u^8 + 5*u^6*v^2 - 4*u^4*v^4 + 2*u^2*v^6 - 5*u^6 - 2*u^4*v^2 - 5*u^2*v^4 + 3*u^2*v^2 + 3*v^4)*F4"
        "/((u^2 - v^2)^3*(v^2 - 1)^2*u^2)"};
}

} // namespace detail

/// Left-minus-right of the chart-specific compatibility condition, with the F's and
/// their derivatives left as symbols F1, F1_x, F1_xy, ... (named after the chart variables)
/// and the potential components as jets.
inline Expr compat_template(const Chart& c) {
    Expr t = sym::parse(detail::compat_template_text(c));
    if (c.kind == ChartKind::Parabolic || c.kind == ChartKind::Elliptic) {
        const auto [c1, c2] = detail::c12_text(c);
        t = sym::subs(t, {{"C1", sym::parse(c1)}, {"C2", sym::parse(c2)}});
    }
    return t;
}

inline sym::SubsMap chart_f_symbols(const Chart& c, const LeadingTerms& lt) {
    return detail::f_symbol_map(lt.F, c.vars, detail::derivative_labels(c));
}

/// The chart compatibility condition as an expression in the chart variables and
/// jets of the unknown components (names from component_names()).
inline Expr chart_compat_jets(const Chart& c, const Coeffs10& A) {
    return sym::subs(compat_template(c), chart_f_symbols(c, leading_terms(c, A)));
}

/// Throws SingularityError when q lies on a singular locus of the chart condition.
inline void check_regular(const Chart& c, const Point2& q, double tol = 1e-12) {
    switch (c.kind) {
    case ChartKind::Cartesian: return;
    case ChartKind::Polar:
        if (std::fabs(q[0]) < tol) throw SingularityError("polar condition is singular at r = 0");
        return;
    case ChartKind::Parabolic:
        if (std::fabs(q[0]) < tol || std::fabs(q[1]) < tol)
            throw SingularityError("parabolic condition is singular at xi = 0 or eta = 0");
        return;
    case ChartKind::Elliptic:
        if (std::fabs(std::fabs(q[0]) - 1) < tol || std::fabs(q[1] - 1) < tol || std::fabs(q[0]) < tol ||
            std::fabs(q[0] * q[0] - q[1] * q[1]) < tol)
            throw SingularityError("elliptic condition is singular at u = 0, u = +-1, v = 1 or u^2 = v^2");
        return;
    }
}

/// The chart compatibility condition for given component functions.
inline Expr chart_compat(const Chart& c, const Coeffs10& A, const Expr& V1, const Expr& V2) {
    const auto names = component_names(c);
    Expr e = chart_compat_jets(c, A);
    e = sym::subs_function(e, names[0], V1);
    e = sym::subs_function(e, names[1], V2);
    return e;
}

/// Floating value of chart_compat at a point, with singular loci rejected.
inline double chart_compat_at(const Chart& c, const Coeffs10& A, const Expr& V1, const Expr& V2, const Point2& q) {
    check_domain(c, q);
    check_regular(c, q);
    sym::Binding b;
    b.set(c.vars[0], q[0]).set(c.vars[1], q[1]);
    return sym::eval_float(chart_compat(c, A, V1, V2), b);
}

// ---------------------------------------------------------------------------
// consistency of the chart conditions with the general one

/// Cartesian derivatives of the chart potential, V_1 ... V_222, in chart variables and jets.
inline sym::SubsMap pulled_back_v_derivatives(const Chart& c) {
    const auto names = component_names(c);
    SeparablePotential W;
    W.chart = c;
    W.c1 = Expr::jet(names[0], c.vars[0]);
    W.c2 = Expr::jet(names[1], c.vars[1]);
    const Expr V = chart_potential(W);
    const auto M = inverse_jacobian(c);
    auto D = [&](int i, const Expr& f) {
        return M[i][0] * sym::diff(f, c.vars[0]) + M[i][1] * sym::diff(f, c.vars[1]);
    };
    sym::SubsMap m;
    const Expr d1 = D(0, V), d2 = D(1, V);
    const Expr d11 = D(0, d1), d12 = D(1, d1), d22 = D(1, d2);
    m.emplace("V_1", d1);
    m.emplace("V_2", d2);
    m.emplace("V_11", d11);
    m.emplace("V_12", d12);
    m.emplace("V_22", d22);
    m.emplace("V_111", D(0, d11));
    m.emplace("V_112", D(1, d11));
    m.emplace("V_122", D(0, d22));
    m.emplace("V_222", D(1, d22));
    return m;
}

struct ConsistencyPoint {
    Point2 q{};
    double multiplier = 0.0;  // general = multiplier * chart
    double residual = 0.0;    // |general - multiplier * chart| / |general|
    bool degenerate = false;  // both functionals vanish on every trial
};

struct ConsistencyReport {
    std::vector<ConsistencyPoint> points;
    double max_residual() const {
        double m = 0.0;
        for (const auto& p : points)
            if (!p.degenerate) m = std::max(m, p.residual);
        return m;
    }
    bool all_degenerate() const {
        return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.degenerate; });
    }
};

/// Precomputed pieces for evaluating both linear functionals at many points.
class CompatComparator {
public:
    explicit CompatComparator(const Chart& c) : chart_(c) {
        const auto names = component_names(c);
        for (int k = 0; k < 2; ++k)
            for (int o = 0; o <= 3; ++o) jets_.push_back(sym::jet_key(names[k], c.vars[k], o));
        // chart form: template in F-symbols; F derivatives compiled separately
        const Expr tmpl = compat_template(c);
        const auto fsyms = chart_f_symbols(c, leading_terms_symbolic(c));
        for (const auto& [name, e] : fsyms) {
            fnames_.push_back(name);
            fexprs_.emplace_back(e, slots_with_coeffs(c.vars));
        }
        const auto split = sym::collect_jets(tmpl);
        for (const auto& j : jets_) {
            auto it = split.coeffs.find(j);
            chart_coeffs_.emplace_back(it == split.coeffs.end() ? Expr() : it->second, chart_slots());
        }
        // general form: template in Cartesian F-derivative symbols and V derivatives
        const auto vders = pulled_back_v_derivatives(c);
        const auto cartF = cartesian_reference_F();
        const auto cf = detail::f_symbol_map(cartF, {"x1", "x2"}, {"1", "2"});
        for (const auto& [name, e] : cf) {
            cfnames_.push_back(name);
            cfexprs_.emplace_back(e, slots_with_coeffs({"x1", "x2"}));
        }
        const Expr eq7 = sym::parse(detail::eq7_template_text());
        // eq7 coefficients of each V symbol, in Cartesian F-derivative symbols
        std::vector<std::string> vnames;
        for (const auto& [vname, vexpr] : vders) vnames.push_back(vname);
        const auto lin = sym::linear_coeffs(eq7, vnames);
        for (std::size_t i = 0; i < vnames.size(); ++i) {
            vnames_.push_back(vnames[i]);
            eq7_coeffs_.emplace_back(lin[i], cf_slots());
        }
        // V-derivative jet coefficients, in chart variables only
        std::vector<sym::JetLinear> vsplit;
        for (const auto& vname : vnames_) vsplit.push_back(sym::collect_jets(vders.at(vname)));
        for (const auto& j : jets_) {
            std::vector<sym::Compiled> row;
            for (const auto& vs : vsplit) {
                auto it = vs.coeffs.find(j);
                row.emplace_back(it == vs.coeffs.end() ? Expr() : it->second,
                                 std::vector<std::string>{c.vars[0], c.vars[1]});
            }
            vjet_.push_back(std::move(row));
        }
    }

    const std::vector<std::string>& jets() const { return jets_; }

    /// Coefficient vectors (per jet) of the general and the chart functional at q for coefficients A.
    std::pair<std::vector<double>, std::vector<double>> functionals(const Coeffs10& A, const Point2& q) const {
        std::vector<double> in{q[0], q[1]};
        for (std::size_t i = 0; i < 10; ++i) in.push_back(A[i].get_d());
        std::vector<double> chart_in{q[0], q[1]};
        for (const auto& f : fexprs_) chart_in.push_back(f(in));
        std::vector<double> chart(jets_.size());
        for (std::size_t j = 0; j < jets_.size(); ++j) chart[j] = chart_coeffs_[j](chart_in);

        const Point2 x = to_cartesian(chart_, q);
        std::vector<double> xin{x[0], x[1]};
        for (std::size_t i = 0; i < 10; ++i) xin.push_back(A[i].get_d());
        std::vector<double> cfin;
        for (const auto& f : cfexprs_) cfin.push_back(f(xin));
        std::vector<double> vcoef;
        for (const auto& e : eq7_coeffs_) vcoef.push_back(e(cfin));
        std::vector<double> general(jets_.size(), 0.0);
        const std::vector<double> qin{q[0], q[1]};
        for (std::size_t j = 0; j < jets_.size(); ++j)
            for (std::size_t k = 0; k < vnames_.size(); ++k) general[j] += vcoef[k] * vjet_[j][k](qin);
        return {general, chart};
    }

private:
    std::vector<std::string> slots_with_coeffs(const std::array<std::string, 2>& v) const {
        std::vector<std::string> s{v[0], v[1]};
        for (const char* n : kCoeffNames) s.emplace_back(n);
        return s;
    }
    std::vector<std::string> chart_slots() const {
        std::vector<std::string> s{chart_.vars[0], chart_.vars[1]};
        s.insert(s.end(), fnames_.begin(), fnames_.end());
        return s;
    }
    std::vector<std::string> cf_slots() const { return cfnames_; }

    Chart chart_;
    std::vector<std::string> jets_;
    std::vector<std::string> fnames_;
    std::vector<sym::Compiled> fexprs_;
    std::vector<sym::Compiled> chart_coeffs_;
    std::vector<std::string> cfnames_;
    std::vector<sym::Compiled> cfexprs_;
    std::vector<std::string> vnames_;
    std::vector<sym::Compiled> eq7_coeffs_;
    std::vector<std::vector<sym::Compiled>> vjet_;
};

/// Compares the general compatibility condition, pulled back to the chart, with the
/// chart-specific form on random cubic potential pairs at each point.
inline ConsistencyReport compat_consistency(const CompatComparator& cmp, const Coeffs10& A,
                                            const std::vector<Point2>& points, int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    ConsistencyReport rep;
    for (const auto& q : points) {
        const auto [gen, chart] = cmp.functionals(A, q);
        ConsistencyPoint cp;
        cp.q = q;
        double ab = 0, bb = 0, aa = 0;
        std::vector<std::pair<double, double>> vals;
        for (int t = 0; t < trials; ++t) {
            // W_k(s) = c0 + c1 s + c2 s^2 + c3 s^3, jets at the point
            std::array<double, 8> jet{};
            for (int k = 0; k < 2; ++k) {
                const double s = q[static_cast<std::size_t>(k)];
                const double c0 = coef(rng), c1 = coef(rng), c2 = coef(rng), c3 = coef(rng);
                jet[static_cast<std::size_t>(4 * k)] = c0 + s * (c1 + s * (c2 + s * c3));
                jet[static_cast<std::size_t>(4 * k + 1)] = c1 + s * (2 * c2 + 3 * s * c3);
                jet[static_cast<std::size_t>(4 * k + 2)] = 2 * c2 + 6 * s * c3;
                jet[static_cast<std::size_t>(4 * k + 3)] = 6 * c3;
            }
            double a = 0, b = 0;
            for (std::size_t j = 0; j < 8; ++j) {
                a += gen[j] * jet[j];
                b += chart[j] * jet[j];
            }
            vals.emplace_back(a, b);
            ab += a * b;
            bb += b * b;
            aa += a * a;
        }
        double scale_a = 0, scale_b = 0;
        for (std::size_t j = 0; j < 8; ++j) {
            scale_a = std::max(scale_a, std::fabs(gen[j]));
            scale_b = std::max(scale_b, std::fabs(chart[j]));
        }
        if (scale_a < 1e-14 && scale_b < 1e-14) {
            cp.degenerate = true;
        } else if (bb == 0) {
            cp.residual = 1.0;
        } else {
            cp.multiplier = ab / bb;
            double rr = 0;
            for (auto [a, b] : vals) rr += (a - cp.multiplier * b) * (a - cp.multiplier * b);
            cp.residual = std::sqrt(rr / aa);
        }
        rep.points.push_back(cp);
    }
    return rep;
}

inline ConsistencyReport compat_consistency(const Chart& c, const Coeffs10& A, const std::vector<Point2>& points,
                                            int trials, std::uint64_t seed) {
    return compat_consistency(CompatComparator(c), A, points, trials, seed);
}

// ---------------------------------------------------------------------------
// reduction to an ODE at a regular point

struct LinearOdeSpec {
    std::string variable;
    std::string function;
    std::array<Expr, 4> c;  // coefficients of y, y', y'', y'''
    std::vector<std::pair<std::string, Expr>> inhomogeneity;  // (unknown constant, known factor)
    std::string fixed_variable;
    Rational fixed_value;
    bool degenerate = false;

    /// c3 y''' + c2 y'' + c1 y' + c0 y + sum K_i k_i evaluated on a candidate y.
    Expr apply(const Expr& y) const {
        Expr out = c[0] * y;
        Expr d = y;
        for (int k = 1; k <= 3; ++k) {
            d = sym::diff(d, variable);
            out += c[k] * d;
        }
        return out;
    }
};

/// Freezes the other chart variable at `fixed` and extracts the linear ODE for the
/// target component (0 or 1). Values of the other component and its derivatives at the
/// frozen point become unknown constants K0 ... K3.
inline LinearOdeSpec reduce_to_ode(const Chart& c, const Coeffs10& A, int target, const Rational& fixed) {
    if (target != 0 && target != 1) throw PreconditionError("target must be component 1 or 2");
    const auto names = component_names(c);
    const int other = 1 - target;
    const auto split = sym::collect_jets(chart_compat_jets(c, A));

    LinearOdeSpec spec;
    spec.variable = c.vars[static_cast<std::size_t>(target)];
    spec.function = names[static_cast<std::size_t>(target)];
    spec.fixed_variable = c.vars[static_cast<std::size_t>(other)];
    spec.fixed_value = fixed;
    const sym::SubsMap freeze{{spec.fixed_variable, Expr(fixed)}};
    auto frozen = [&](const Expr& x) {
        try {
            return sym::subs(x, freeze);
        } catch (const EvalError&) {
            throw SingularityError("frozen value " + fixed.get_str() + " is a singular point of the condition");
        }
    };
    for (int o = 0; o <= 3; ++o) {
        auto it = split.coeffs.find(sym::jet_key(spec.function, spec.variable, o));
        spec.c[o] = it == split.coeffs.end() ? Expr() : frozen(it->second);
    }
    for (int o = 0; o <= 3; ++o) {
        auto it = split.coeffs.find(sym::jet_key(names[static_cast<std::size_t>(other)], spec.fixed_variable, o));
        if (it == split.coeffs.end()) continue;
        Expr k = frozen(it->second);
        if (!k.is_zero()) spec.inhomogeneity.emplace_back("K" + std::to_string(o), k);
    }
    spec.degenerate = spec.c[3].is_zero() && spec.c[2].is_zero() && spec.c[1].is_zero();
    return spec;
}

/// Basis of the polynomial solutions of degree <= max_degree of the homogeneous ODE.
inline std::vector<Expr> polynomial_solutions(const LinearOdeSpec& spec, int max_degree) {
    const Expr x = sym::sym(spec.variable);
    std::vector<Expr> monos;
    for (int k = 0; k <= max_degree; ++k) monos.push_back(sym::pow(x, Rational(k)));
    // rows: coefficients of powers of x after clearing denominators
    std::vector<Expr> images;
    for (const auto& m : monos) images.push_back(sym::clear_denominators(spec.apply(m)));
    std::map<sym::Exponents, std::vector<Rational>> rows;
    for (std::size_t k = 0; k < images.size(); ++k) {
        for (const auto& [ex, coeff] : sym::poly_coeffs(images[k], {spec.variable})) {
            auto v = coeff.constant_value();
            if (!v) throw NonPolynomialError("ODE coefficients are not rational: " + sym::to_string(coeff));
            auto& row = rows[ex];
            row.resize(images.size());
            row[k] = *v;
        }
    }
    sym::RMatrix m;
    for (auto& [ex, row] : rows) m.push_back(row);
    std::vector<Expr> basis;
    for (const auto& v : sym::nullspace(m, images.size())) {
        Expr p;
        for (std::size_t k = 0; k < v.size(); ++k) p += sym::scale(monos[k], v[k]);
        basis.push_back(p);
    }
    return basis;
}

// ---------------------------------------------------------------------------
// vanishing analysis in coefficient space

struct KernelReport {
    Chart chart = Chart::cartesian();
    std::vector<int> selected;  // 1-based F indices
    std::vector<sym::RVector> basis;
    std::size_t dimension = 0;
    std::string method;
};

namespace detail {

inline std::vector<Expr> kernel_targets(const Chart& c, const std::vector<int>& selected) {
    const LeadingTerms lt = leading_terms_symbolic(c);
    std::vector<Expr> out;
    for (int j : selected) {
        if (j < 1 || j > 4) throw PreconditionError("F index must be in 1..4");
        out.push_back(c.kind == ChartKind::Elliptic ? lt.Fhat[static_cast<std::size_t>(j - 1)]
                                                    : lt.F[static_cast<std::size_t>(j - 1)]);
    }
    return out;
}

inline std::vector<std::string> coeff_names() { return {kCoeffNames.begin(), kCoeffNames.end()}; }

inline KernelReport finish_kernel(const Chart& c, const std::vector<int>& selected, sym::RMatrix rows,
                                  std::string method) {
    KernelReport rep;
    rep.chart = c;
    rep.selected = selected;
    rep.basis = sym::nullspace(std::move(rows), 10);
    rep.dimension = rep.basis.size();
    rep.method = std::move(method);
    return rep;
}

} // namespace detail

/// Exact kernel from coefficient extraction: each selected F (elliptic: numerator) is
/// cleared of denominators and grouped by chart-variable monomials, including radical classes.
inline KernelReport vanishing_kernel_symbolic(const Chart& c, const std::vector<int>& selected) {
    sym::RMatrix rows;
    const auto names = detail::coeff_names();
    for (const Expr& F : detail::kernel_targets(c, selected)) {
        const Expr cleared = sym::clear_denominators(F);
        for (const auto& [key, coeff] : sym::collect(cleared, {c.vars[0], c.vars[1]})) {
            const auto lin = sym::linear_coeffs(coeff, names);
            sym::RVector row;
            for (const auto& l : lin) {
                auto v = l.constant_value();
                if (!v) throw Error("unexpected symbolic coefficient " + sym::to_string(l));
                row.push_back(*v);
            }
            rows.push_back(std::move(row));
        }
    }
    return detail::finish_kernel(c, selected, std::move(rows), "symbolic");
}

/// Exact rational chart points on which every chart quantity is rational.
inline std::vector<sym::Binding> rational_sample_points(const Chart& c, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> small(2, 9);
    std::vector<sym::Binding> pts;
    while (static_cast<int>(pts.size()) < count) {
        const int m = small(rng), n = small(rng), k = small(rng);
        sym::Binding b;
        switch (c.kind) {
        case ChartKind::Cartesian:
        case ChartKind::Parabolic:
            b.set(c.vars[0], Rational(m, k)).set(c.vars[1], Rational(n, m + k));
            break;
        case ChartKind::Polar: {
            // Pythagorean angle: cos = (1 - t^2)/(1 + t^2), sin = 2t/(1 + t^2)
            const Rational t(n, k + 1);
            const Rational den = 1 + t * t;
            b.set("r", Rational(m, k)).set("th", sym::ExactAngle{(1 - t * t) / den, 2 * t / den});
            break;
        }
        case ChartKind::Elliptic: {
            // u = (1 - a^2)/(1 + a^2), v = (1 + b^2)/(1 - b^2) make both radicals rational
            const Rational a(m, n + k), bb(1, n + 1);
            b.set("u", (1 - a * a) / (1 + a * a)).set("v", (1 + bb * bb) / (1 - bb * bb));
            break;
        }
        }
        pts.push_back(std::move(b));
    }
    return pts;
}

/// Exact kernel from sampling the selected F's at rational points, one row per point and F.
inline KernelReport vanishing_kernel_sampled(const Chart& c, const std::vector<int>& selected, int points = 16,
                                             std::uint64_t seed = 7) {
    const auto targets = detail::kernel_targets(c, selected);
    const auto pts = rational_sample_points(c, points, seed);
    sym::RMatrix rows;
    for (const Expr& F : targets) {
        for (const auto& p : pts) {
            sym::RVector row;
            for (std::size_t i = 0; i < 10; ++i) {
                sym::Binding b = p;
                Coeffs10::unit(kCoeffNames[i]).bind(b);
                row.push_back(sym::eval_exact(F, b));
            }
            rows.push_back(std::move(row));
        }
    }
    return detail::finish_kernel(c, selected, std::move(rows), "sampled");
}

inline KernelReport vanishing_kernel(const Chart& c, const std::vector<int>& selected) {
    return vanishing_kernel_symbolic(c, selected);
}

inline Coeffs10 to_coeffs(const sym::RVector& v) {
    Coeffs10 A;
    for (std::size_t i = 0; i < 10; ++i) A[i] = v[i];
    return A;
}

/// True when span(a) == span(b) as subspaces of Q^10.
inline bool same_span(const std::vector<sym::RVector>& a, const std::vector<sym::RVector>& b) {
    if (a.size() != b.size()) return false;
    sym::RMatrix m(a.begin(), a.end());
    const std::size_t ra = sym::rank(m, 10);
    m.insert(m.end(), b.begin(), b.end());
    return sym::rank(m, 10) == ra && ra == a.size();
}

} // namespace thirdint
