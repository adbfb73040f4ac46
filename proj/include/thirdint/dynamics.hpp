#pragma once

#include "determine.hpp"
#include "ode.hpp"

#include <Eigen/Dense>

namespace thirdint {

// ---------------------------------------------------------------------------
// phase space

inline const std::vector<std::string>& phase_variables() {
    static const std::vector<std::string> v{"x1", "x2", "p1", "p2"};
    return v;
}

struct PhaseState {
    double x1 = 0, x2 = 0, p1 = 0, p2 = 0;
    std::array<double, 4> array() const { return {x1, x2, p1, p2}; }
};

/// {f, h} = sum_i (df/dx_i dh/dp_i - df/dp_i dh/dx_i).
inline Expr poisson_bracket(const Expr& f, const Expr& h) {
    sym::poly_coeffs(f, {"p1", "p2"});
    sym::poly_coeffs(h, {"p1", "p2"});
    Expr out;
    for (const auto& [x, p] : {std::pair{"x1", "p1"}, std::pair{"x2", "p2"}})
        out += sym::diff(f, x) * sym::diff(h, p) - sym::diff(f, p) * sym::diff(h, x);
    return out;
}

struct GaugeFieldGrid;

/// Coefficients of a candidate third-order integral with symbolic gauge fields.
struct IntegralCandidate {
    Coeffs10 A;
    std::optional<Expr> g1;
    std::optional<Expr> g2;
    double hbar = 0.0;
};

/// X = F1 p1^3 + F2 p1^2 p2 + F3 p1 p2^2 + F4 p2^3 + g1 p1 + g2 p2 (classical).
inline Expr build_integral(const IntegralCandidate& c) {
    if (!c.g1 || !c.g2) throw PreconditionError("sampled gauge fields have no symbolic integral; use the grid path");
    const auto Fs = cartesian_reference_F();
    const auto m = c.A.subs_map();
    const Expr p1 = sym::sym("p1"), p2 = sym::sym("p2");
    Expr X = sym::subs(Fs[0], m) * sym::pow(p1, 3L) + sym::subs(Fs[1], m) * p1 * p1 * p2 +
             sym::subs(Fs[2], m) * p1 * p2 * p2 + sym::subs(Fs[3], m) * sym::pow(p2, 3L);
    return X + detail::cartesian_vars(*c.g1) * p1 + detail::cartesian_vars(*c.g2) * p2;
}

inline Expr free_hamiltonian() { return sym::parse("(p1^2 + p2^2)/2"); }
inline Expr angular_momentum() { return sym::parse("x1*p2 - x2*p1"); }

// ---------------------------------------------------------------------------
// trajectories

struct DriftReport {
    std::vector<double> t;
    std::vector<std::vector<double>> values;  // values[k][i] = Q_k(t_i)
    std::vector<double> max_drift;            // max |Q(t) - Q(0)| / max(1, |Q(0)|)
    bool truncated = false;
    double end_time = 0.0;
    std::string reason;
};

/// Integrates Hamilton's equations for H and records the drift of each quantity.
inline DriftReport trajectory_drift(const Expr& H, const std::vector<Expr>& integrals, const PhaseState& s0,
                                    double T, double dt, double tol, const sym::Binding& params = {}) {
    if (!(T > 0) || !(dt > 0)) throw PreconditionError("duration and sample step must be positive");
    const auto& slots = phase_variables();
    std::array<sym::Compiled, 4> flow{sym::Compiled(sym::diff(H, "p1"), slots, params),
                                      sym::Compiled(sym::diff(H, "p2"), slots, params),
                                      sym::Compiled(-sym::diff(H, "x1"), slots, params),
                                      sym::Compiled(-sym::diff(H, "x2"), slots, params)};
    std::vector<sym::Compiled> qs;
    for (const auto& q : integrals) qs.emplace_back(q, slots, params);

    auto f = [&](const State& x, State& d, double) {
        for (std::size_t i = 0; i < 4; ++i) {
            d[i] = flow[i](x);
            if (!std::isfinite(d[i])) throw SingularityError("trajectory reached a singularity of the potential");
        }
    };
    OdeOptions o;
    o.abs_tol = o.rel_tol = tol;
    o.initial_step = std::min(dt, 1e-2);
    o.min_step = 1e-14;
    const auto n = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    const auto grid = linspace(0.0, T, n);
    const auto a = s0.array();

    DriftReport rep;
    OdeRun run;
    try {
        run = integrate_ode(f, State(a.begin(), a.end()), 0.0, T, grid, o);
    } catch (const SingularityError& e) {
        rep.truncated = true;
        rep.reason = e.what();
        run = OdeRun{};
    }
    if (run.stop != OdeStop::Completed) {
        rep.truncated = true;
        rep.reason = run.stop == OdeStop::Blowup ? "trajectory diverged" : "step size collapsed";
    }
    rep.t = run.t;
    rep.values.assign(qs.size(), {});
    rep.max_drift.assign(qs.size(), 0.0);
    for (std::size_t k = 0; k < qs.size(); ++k) {
        for (const auto& x : run.x) rep.values[k].push_back(qs[k](x));
        if (rep.values[k].empty()) continue;
        const double q0 = rep.values[k].front();
        for (double v : rep.values[k])
            rep.max_drift[k] = std::max(rep.max_drift[k], std::fabs(v - q0) / std::max(1.0, std::fabs(q0)));
    }
    rep.end_time = rep.t.empty() ? 0.0 : rep.t.back();
    return rep;
}

// ---------------------------------------------------------------------------
// numerical gauge fields

/// Cartesian derivatives of V at a point: V_1, V_2, V_11, V_12, V_22, V_111, V_112, V_122, V_222.
using VDerivs = std::array<double, 9>;
using VDerivField = std::function<VDerivs(double, double)>;
inline constexpr std::array<const char*, 9> kVDerivNames{"V_1", "V_2", "V_11", "V_12", "V_22",
                                                         "V_111", "V_112", "V_122", "V_222"};

/// Derivatives of a separable potential: symbolically for expression components,
/// from the component jets for sampled Cartesian components.
inline VDerivField potential_derivatives(const SeparablePotential& W) {
    W.validate();
    if (W.c1.is_symbolic() && W.c2.is_symbolic()) {
        const auto m = detail::v_symbol_map(cartesian_potential(W));
        auto compiled = std::make_shared<std::vector<sym::Compiled>>();
        for (const char* n : kVDerivNames) compiled->emplace_back(m.at(n), std::vector<std::string>{"x1", "x2"}, W.params);
        return [compiled](double x, double y) {
            VDerivs d{};
            const std::array<double, 2> in{x, y};
            for (std::size_t i = 0; i < 9; ++i) d[i] = (*compiled)[i](in);
            return d;
        };
    }
    if (W.chart.kind != ChartKind::Cartesian)
        throw PreconditionError("sampled components are supported in the Cartesian chart only");
    auto jet_of = [&W](const Component& c, const std::string& var) -> SampledComponent {
        if (!c.is_symbolic()) return c.sampled;
        std::vector<sym::Compiled> ds;
        Expr e = *c.expr;
        for (int k = 0; k <= 3; ++k) {
            ds.emplace_back(e, std::vector<std::string>{var}, W.params);
            e = sym::diff(e, var);
        }
        return [ds](double s) {
            const std::array<double, 1> in{s};
            return Jet4{ds[0](in), ds[1](in), ds[2](in), ds[3](in)};
        };
    };
    auto a = jet_of(W.c1, "x");
    auto b = jet_of(W.c2, "y");
    return [a, b](double x, double y) {
        const Jet4 ja = a(x), jb = b(y);
        return VDerivs{ja[1], jb[1], ja[2], 0.0, jb[2], ja[3], 0.0, 0.0, jb[3]};
    };
}

namespace detail {

/// F_j and their first and second derivatives in x1, x2 for fixed coefficients.
class CartesianFField {
public:
    explicit CartesianFField(const Coeffs10& A) {
        const auto Fs = cartesian_reference_F();
        const auto m = A.subs_map();
        const std::vector<std::string> slots{"x1", "x2"};
        for (std::size_t j = 0; j < 4; ++j) {
            const Expr F = sym::subs(Fs[j], m);
            f_[j][0] = sym::Compiled(F, slots);
            f_[j][1] = sym::Compiled(sym::diff(F, "x1"), slots);
            f_[j][2] = sym::Compiled(sym::diff(F, "x2"), slots);
            f_[j][3] = sym::Compiled(sym::diff(F, "x1", 2), slots);
            f_[j][4] = sym::Compiled(sym::diff(sym::diff(F, "x1"), "x2"), slots);
            f_[j][5] = sym::Compiled(sym::diff(F, "x2", 2), slots);
        }
    }
    /// [j][k]: F_{j+1} and its derivatives in the order 1, ,1 ,2 ,11 ,12 ,22.
    std::array<std::array<double, 6>, 4> at(double x, double y) const {
        std::array<std::array<double, 6>, 4> out{};
        const std::array<double, 2> in{x, y};
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t k = 0; k < 6; ++k) out[j][k] = f_[j][k](in);
        return out;
    }

private:
    std::array<std::array<sym::Compiled, 6>, 4> f_;
};

struct GaugeSources {
    double P, Q, R;       // right-hand sides of the three determining equations
    double Pb, Qa, Qb, Ra;  // P_,2  Q_,1  Q_,2  R_,1
    double compat;        // the general compatibility condition
    double scale;         // magnitude of its terms
};

inline GaugeSources gauge_sources(const CartesianFField& FF, const VDerivField& V, double x, double y) {
    const auto F = FF.at(x, y);
    const VDerivs d = V(x, y);
    const double V1 = d[0], V2 = d[1], V11 = d[2], V12 = d[3], V22 = d[4];
    GaugeSources s{};
    s.P = 3 * F[0][0] * V1 + F[1][0] * V2;
    s.Q = 2 * (F[1][0] * V1 + F[2][0] * V2);
    s.R = F[2][0] * V1 + 3 * F[3][0] * V2;
    s.Pb = 3 * F[0][2] * V1 + 3 * F[0][0] * V12 + F[1][2] * V2 + F[1][0] * V22;
    s.Qa = 2 * (F[1][1] * V1 + F[1][0] * V11 + F[2][1] * V2 + F[2][0] * V12);
    s.Qb = 2 * (F[1][2] * V1 + F[1][0] * V12 + F[2][2] * V2 + F[2][0] * V22);
    s.Ra = F[2][1] * V1 + F[2][0] * V11 + 3 * F[3][1] * V2 + 3 * F[3][0] * V12;
    // general compatibility condition, term by term
    const auto& F1 = F[0];
    const auto& F2 = F[1];
    const auto& F3 = F[2];
    const auto& F4 = F[3];
    const std::array<double, 9> terms{
        -F3[0] * d[5],
        (2 * F2[0] - 3 * F4[0]) * d[6],
        (-3 * F1[0] + 2 * F3[0]) * d[7],
        -F2[0] * d[8],
        2 * (F2[2] - F3[1]) * V11,
        2 * (-3 * F1[2] + F2[1] + F3[2] - 3 * F4[1]) * V12,
        2 * (-F2[2] + F3[1]) * V22,
        (-3 * F1[5] + 2 * F2[4] - F3[3]) * V1,
        (-F2[5] + 2 * F3[4] - 3 * F4[3]) * V2};
    s.compat = 0;
    s.scale = 1;
    for (double t : terms) {
        s.compat += t;
        s.scale = std::max(s.scale, std::fabs(t));
    }
    return s;
}

} // namespace detail

struct Window {
    double x0 = -1, x1 = 1, y0 = -1, y1 = 1;
    double cx() const { return (x0 + x1) / 2; }
    double cy() const { return (y0 + y1) / 2; }
};

/// Gauge fields sampled on a rectangular grid; rows are y, columns x.
struct GaugeFieldGrid {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::vector<double>> g1;
    std::vector<std::vector<double>> g2;
    Point2 basepoint{};   // snapped to a grid node
    Point2 centre{};      // where the rotation gauge is fixed
    std::array<double, 3> residual{};  // max norms of the three determining equations (interior nodes)
    double max_residual() const { return std::max({residual[0], residual[1], residual[2]}); }
};

namespace detail {

inline std::size_t nearest_index(const std::vector<double>& v, double t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::fabs(v[i] - t) < std::fabs(v[best] - t)) best = i;
    return best;
}

/// Cumulative Simpson integral (trapezoid with one Richardson step) of samples on a
/// uniform grid of spacing h/2, returning values at every second node, anchored at index `a`.
inline std::vector<double> cumulative_from(const std::vector<double>& fine, double h, std::size_t a) {
    const std::size_t n = (fine.size() - 1) / 2;
    std::vector<double> out(n + 1, 0.0);
    for (std::size_t i = a; i < n; ++i) {
        const double trap_h = h / 2 * (fine[2 * i] + fine[2 * i + 2]);
        const double trap_h2 = h / 4 * (fine[2 * i] + 2 * fine[2 * i + 1] + fine[2 * i + 2]);
        out[i + 1] = out[i] + (4 * trap_h2 - trap_h) / 3;
    }
    for (std::size_t i = a; i-- > 0;) {
        const double trap_h = h / 2 * (fine[2 * i] + fine[2 * i + 2]);
        const double trap_h2 = h / 4 * (fine[2 * i] + 2 * fine[2 * i + 1] + fine[2 * i + 2]);
        out[i] = out[i + 1] - (4 * trap_h2 - trap_h) / 3;
    }
    return out;
}

/// Fourth-order central first derivative along a row at interior index i (2 <= i < n-2).
inline double d1_4(const std::vector<double>& f, std::size_t i, double h) {
    return (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * h);
}

} // namespace detail

/// Reconstructs g1, g2 from the second-order determining equations by axis-parallel
/// line quadrature. The vorticity g2_,1 - g1_,2 is integrated from its gradient and set
/// to zero at the window centre; g1 = g2 = 0 at the base point.
inline GaugeFieldGrid solve_g_numeric(const SeparablePotential& W, const Coeffs10& A, const Window& win,
                                      const Point2& basepoint, std::size_t resolution) {
    if (resolution < 5) throw PreconditionError("resolution must be at least 5");
    if (!(win.x1 > win.x0) || !(win.y1 > win.y0)) throw PreconditionError("empty window");
    const VDerivField V = potential_derivatives(W);
    const detail::CartesianFField FF(A);
    const std::size_t n = resolution - 1;  // coarse cells
    const std::size_t m = 2 * n;           // fine cells
    const double hx = (win.x1 - win.x0) / static_cast<double>(n), hy = (win.y1 - win.y0) / static_cast<double>(n);
    const auto xf = linspace(win.x0, win.x1, m), yf = linspace(win.y0, win.y1, m);

    // sources on the fine grid
    std::vector<std::vector<detail::GaugeSources>> S(m + 1, std::vector<detail::GaugeSources>(m + 1));
    for (std::size_t j = 0; j <= m; ++j)
        for (std::size_t i = 0; i <= m; ++i) {
            S[j][i] = detail::gauge_sources(FF, V, xf[i], yf[j]);
            const auto& s = S[j][i];
            if (!std::isfinite(s.P) || !std::isfinite(s.Q) || !std::isfinite(s.R) || !std::isfinite(s.compat))
                throw SingularityError("window touches a singularity of the potential");
        }
    double worst = 0.0;
    for (const auto& row : S)
        for (const auto& s : row) worst = std::max(worst, std::fabs(s.compat) / s.scale);
    if (worst > 1e-8)
        throw PreconditionError("compatibility condition fails on the window (relative residual " +
                                std::to_string(worst) + ")");

    // vorticity on the fine grid; its gradient is sampled on a grid twice as fine again
    const std::size_t ci = detail::nearest_index(xf, win.cx()), cj = detail::nearest_index(yf, win.cy());
    std::vector<std::vector<double>> omega(m + 1, std::vector<double>(m + 1, 0.0));
    {
        auto grad = [&](double x, double y) {
            const auto s = detail::gauge_sources(FF, V, x, y);
            return std::array<double, 2>{s.Qa - 2 * s.Pb, 2 * s.Ra - s.Qb};
        };
        const auto xff = linspace(win.x0, win.x1, 2 * m), yff = linspace(win.y0, win.y1, 2 * m);
        std::vector<double> row(2 * m + 1);
        for (std::size_t k = 0; k <= 2 * m; ++k) row[k] = grad(xff[k], yf[cj])[0];
        const auto base = detail::cumulative_from(row, hx / 2, ci);
        for (std::size_t i = 0; i <= m; ++i) {
            std::vector<double> col(2 * m + 1);
            for (std::size_t k = 0; k <= 2 * m; ++k) col[k] = grad(xf[i], yff[k])[1];
            const auto c = detail::cumulative_from(col, hy / 2, cj);
            for (std::size_t j = 0; j <= m; ++j) omega[j][i] = base[i] + c[j];
        }
    }

    GaugeFieldGrid out;
    out.x = linspace(win.x0, win.x1, n);
    out.y = linspace(win.y0, win.y1, n);
    const std::size_t bi = detail::nearest_index(out.x, basepoint[0]), bj = detail::nearest_index(out.y, basepoint[1]);
    out.basepoint = {out.x[bi], out.y[bj]};
    out.centre = {xf[ci], yf[cj]};
    out.g1.assign(n + 1, std::vector<double>(n + 1));
    out.g2.assign(n + 1, std::vector<double>(n + 1));
    {
        std::vector<double> r1(m + 1), r2(m + 1);
        for (std::size_t k = 0; k <= m; ++k) {
            const auto& s = S[2 * bj][k];
            r1[k] = s.P;
            r2[k] = (s.Q + omega[2 * bj][k]) / 2;
        }
        const auto b1 = detail::cumulative_from(r1, hx, bi), b2 = detail::cumulative_from(r2, hx, bi);
        for (std::size_t i = 0; i <= n; ++i) {
            std::vector<double> c1(m + 1), c2(m + 1);
            for (std::size_t k = 0; k <= m; ++k) {
                const auto& s = S[k][2 * i];
                c1[k] = (s.Q - omega[k][2 * i]) / 2;
                c2[k] = s.R;
            }
            const auto v1 = detail::cumulative_from(c1, hy, bj), v2 = detail::cumulative_from(c2, hy, bj);
            for (std::size_t j = 0; j <= n; ++j) {
                out.g1[j][i] = b1[i] + v1[j];
                out.g2[j][i] = b2[i] + v2[j];
            }
        }
    }

    // residuals of the three equations with fourth-order differences
    for (std::size_t j = 2; j + 2 <= n; ++j) {
        for (std::size_t i = 2; i + 2 <= n; ++i) {
            std::vector<double> c1(5), c2(5);
            for (std::size_t k = 0; k < 5; ++k) {
                c1[k] = out.g1[j + k - 2][i];
                c2[k] = out.g2[j + k - 2][i];
            }
            const auto& s = S[2 * j][2 * i];
            const double g11 = detail::d1_4(out.g1[j], i, hx), g22 = detail::d1_4(c2, 2, hy);
            const double g12 = detail::d1_4(c1, 2, hy), g21 = detail::d1_4(out.g2[j], i, hx);
            out.residual[0] = std::max(out.residual[0], std::fabs(g11 - s.P));
            out.residual[1] = std::max(out.residual[1], std::fabs(g12 + g21 - s.Q));
            out.residual[2] = std::max(out.residual[2], std::fabs(g22 - s.R));
        }
    }
    return out;
}

/// Zeroth-order determining equation evaluated at every grid node with the sampled gauge fields.
inline std::vector<std::vector<double>> zeroth_residual_grid(const GaugeFieldGrid& g, const SeparablePotential& W,
                                                             const Coeffs10& A, double hbar) {
    const VDerivField V = potential_derivatives(W);
    const detail::CartesianFField FF(A);
    const double h2 = hbar * hbar;
    std::vector<std::vector<double>> out(g.y.size(), std::vector<double>(g.x.size()));
    for (std::size_t j = 0; j < g.y.size(); ++j)
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            const double x = g.x[i], y = g.y[j];
            const auto F = FF.at(x, y);
            const VDerivs d = V(x, y);
            const double a1 = g.g1[j][i] - h2 * (-2 * A["A300"].get_d() * y + A["A210"].get_d() / 2);
            const double a2 = g.g2[j][i] - h2 * (2 * A["A300"].get_d() * x + A["A201"].get_d() / 2);
            out[j][i] = a1 * d[0] + a2 * d[1] -
                        h2 / 4 * (F[0][0] * d[5] + F[1][0] * d[6] + F[2][0] * d[7] + F[3][0] * d[8]);
        }
    return out;
}

struct KillingFit {
    double a = 0, b = 0, c = 0;  // g1 += a - c y, g2 += b + c x
    double residual = 0.0;       // max |zeroth residual| after the fit
};

/// The second-order equations fix g1, g2 only up to a Euclidean Killing field
/// (a - c y, b + c x). Chooses it by least squares on the zeroth-order equation and
/// applies it to the grid.
inline KillingFit fit_killing_gauge(GaugeFieldGrid& g, const SeparablePotential& W, const Coeffs10& A, double hbar) {
    const VDerivField V = potential_derivatives(W);
    const auto r0 = zeroth_residual_grid(g, W, A, hbar);
    const Eigen::Index rows = static_cast<Eigen::Index>(g.x.size() * g.y.size());
    Eigen::MatrixXd M(rows, 3);
    Eigen::VectorXd rhs(rows);
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < g.y.size(); ++j)
        for (std::size_t i = 0; i < g.x.size(); ++i, ++k) {
            const VDerivs d = V(g.x[i], g.y[j]);
            M(k, 0) = d[0];
            M(k, 1) = d[1];
            M(k, 2) = -g.y[j] * d[0] + g.x[i] * d[1];
            rhs(k) = -r0[j][i];
        }
    const Eigen::Vector3d sol = M.colPivHouseholderQr().solve(rhs);
    KillingFit fit{sol(0), sol(1), sol(2), 0.0};
    for (std::size_t j = 0; j < g.y.size(); ++j)
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            g.g1[j][i] += fit.a - fit.c * g.y[j];
            g.g2[j][i] += fit.b + fit.c * g.x[i];
        }
    for (const auto& row : zeroth_residual_grid(g, W, A, hbar))
        for (double v : row) fit.residual = std::max(fit.residual, std::fabs(v));
    return fit;
}

} // namespace thirdint
