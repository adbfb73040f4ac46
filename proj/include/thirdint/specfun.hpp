#pragma once

#include "eval.hpp"
#include "ode.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <memory>
#include <optional>

namespace thirdint {

using sym::Expr;
using sym::Rational;

enum class PainleveKind { PI, PII, PIV };

struct PainleveSpec {
    PainleveKind kind = PainleveKind::PI;
    double alpha = 0.0;  // P_II, P_IV
    double beta = 0.0;   // P_IV
    double z0 = 0.0;
    double w0 = 0.0;
    double dw0 = 0.0;
    double z1 = 1.0;        // integrate from z0 to z1
    std::size_t samples = 200;
    double tol = 1e-10;
};

/// Values of w, w' on a grid, with local error estimates and pole-proximity flags.
struct SampledSolution {
    std::vector<double> z;
    std::vector<double> w;
    std::vector<double> dw;
    std::vector<double> err;
    std::vector<bool> pole_flag;
    bool pole = false;
    double pole_location = 0.0;
};

inline constexpr double kPivGuard = 1e-8;

inline const char* to_string(PainleveKind k) {
    switch (k) {
    case PainleveKind::PI: return "P1";
    case PainleveKind::PII: return "P2";
    case PainleveKind::PIV: return "P4";
    }
    return "?";
}

inline PainleveKind painleve_kind(std::string_view s) {
    if (s == "P1" || s == "PI") return PainleveKind::PI;
    if (s == "P2" || s == "PII") return PainleveKind::PII;
    if (s == "P4" || s == "PIV") return PainleveKind::PIV;
    throw PreconditionError("unknown Painleve kind '" + std::string(s) + "'");
}

/// w'' in the standard normal form.
inline double painleve_rhs(const PainleveSpec& s, double z, double w, double dw) {
    switch (s.kind) {
    case PainleveKind::PI: return 6 * w * w + z;
    case PainleveKind::PII: return 2 * w * w * w + z * w + s.alpha;
    case PainleveKind::PIV:
        return dw * dw / (2 * w) + 1.5 * w * w * w + 4 * z * w * w + 2 * (z * z - s.alpha) * w + s.beta / w;
    }
    return 0.0;
}

namespace detail {

inline SampledSolution to_sampled(const OdeRun& run) {
    SampledSolution out;
    out.z = run.t;
    for (const auto& x : run.x) {
        out.w.push_back(x[0]);
        out.dw.push_back(x[1]);
    }
    out.err = run.err;
    out.pole_flag = run.near_pole;
    out.pole = run.stop != OdeStop::Completed;
    out.pole_location = run.stop_time;
    return out;
}

} // namespace detail

inline SampledSolution integrate_painleve(const PainleveSpec& s) {
    if (!(s.tol > 0)) throw PreconditionError("tolerance must be positive");
    if (s.samples == 0) throw PreconditionError("at least one sample interval is required");
    if (s.kind == PainleveKind::PIV && std::fabs(s.w0) < kPivGuard)
        throw SingularityError("P_IV initial value inside the w = 0 guard band");
    OdeOptions o;
    o.abs_tol = o.rel_tol = s.tol;
    o.watch = {0};
    o.initial_step = std::min(1e-3, std::fabs(s.z1 - s.z0) / static_cast<double>(s.samples));
    if (s.kind == PainleveKind::PIV) {
        o.guard = [](const State& x, double z) {
            if (std::fabs(x[0]) < kPivGuard)
                throw SingularityError("P_IV solution reaches w = 0 near z = " + std::to_string(z));
        };
    }
    auto f = [&s](const State& x, State& d, double z) {
        d[0] = x[1];
        d[1] = painleve_rhs(s, z, x[0], x[1]);
    };
    auto run = integrate_ode(f, {s.w0, s.dw0}, s.z0, s.z1, linspace(s.z0, s.z1, s.samples), o);
    if (s.kind == PainleveKind::PIV)
        for (const auto& x : run.x)
            if (std::fabs(x[0]) < kPivGuard) throw SingularityError("P_IV solution reaches w = 0");
    return detail::to_sampled(run);
}

/// Taylor coefficients of the P_I solution with w(z0)=w0, w'(z0)=dw0, from the ODE recursion.
inline std::vector<double> painleve1_taylor(double z0, double w0, double dw0, int order) {
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    c[0] = w0;
    if (order >= 1) c[1] = dw0;
    // z = z0 + t:  (n+2)(n+1) c_{n+2} = 6 sum c_k c_{n-k} + z0 [n=0] + [n=1]
    for (int n = 0; n + 2 <= order; ++n) {
        double s = 0.0;
        for (int k = 0; k <= n; ++k) s += c[static_cast<std::size_t>(k)] * c[static_cast<std::size_t>(n - k)];
        double rhs = 6 * s + (n == 0 ? z0 : 0.0) + (n == 1 ? 1.0 : 0.0);
        c[static_cast<std::size_t>(n + 2)] = rhs / ((n + 2) * (n + 1));
    }
    return c;
}

// ---------------------------------------------------------------------------

struct WeierstrassSpec {
    double g2 = 0.0;
    double g3 = 0.0;
    double z0 = 0.0;
    double p0 = 0.0;
    double dp0 = 0.0;
    double z1 = 1.0;
    std::size_t samples = 200;
    double tol = 1e-10;
};

struct WeierstrassResult {
    SampledSolution solution;
    double max_drift = 0.0;      // of (p')^2 - 4 p^3 + g2 p + g3, relative to the size of its terms
    double max_abs_drift = 0.0;
};

/// Size of the terms of the first integral, used to normalize its drift.
inline double weierstrass_scale(double g2, double g3, double p, double dp) {
    return std::max({1.0, dp * dp, 4 * std::fabs(p * p * p), std::fabs(g2 * p), std::fabs(g3)});
}

inline double weierstrass_invariant(double g2, double g3, double p, double dp) {
    return dp * dp - 4 * p * p * p + g2 * p + g3;
}

inline WeierstrassResult weierstrass_p(const WeierstrassSpec& s) {
    const double i0 = weierstrass_invariant(s.g2, s.g3, s.p0, s.dp0);
    if (std::fabs(i0) > 1e-12 * weierstrass_scale(s.g2, s.g3, s.p0, s.dp0))
        throw PreconditionError("initial data violates (p')^2 = 4p^3 - g2 p - g3 (defect " + std::to_string(i0) + ")");
    OdeOptions o;
    o.abs_tol = o.rel_tol = s.tol;
    o.watch = {0};
    o.initial_step = std::min(1e-3, std::fabs(s.z1 - s.z0) / static_cast<double>(s.samples));
    auto f = [&s](const State& x, State& d, double) {
        d[0] = x[1];
        d[1] = 6 * x[0] * x[0] - s.g2 / 2;
    };
    WeierstrassResult r;
    r.solution = detail::to_sampled(integrate_ode(f, {s.p0, s.dp0}, s.z0, s.z1, linspace(s.z0, s.z1, s.samples), o));
    for (std::size_t i = 0; i < r.solution.z.size(); ++i) {
        if (r.solution.pole_flag[i]) continue;
        const double p = r.solution.w[i], dp = r.solution.dw[i];
        const double d = std::fabs(weierstrass_invariant(s.g2, s.g3, p, dp) - i0);
        r.max_abs_drift = std::max(r.max_abs_drift, d);
        r.max_drift = std::max(r.max_drift, d / weierstrass_scale(s.g2, s.g3, p, dp));
    }
    return r;
}

// ---------------------------------------------------------------------------
// scaling between the separated Case 1 equation and the P_I normal form

/// hbar^2 V'' = 6 V^2 + k x  is solved by  V(x) = alpha * w(beta * x)  with  w'' = 6 w^2 + z,
/// where beta = (k / hbar^4)^(1/5) and alpha = hbar^2 beta^2.
struct PainleveScaling {
    double alpha = 0.0;
    double beta = 0.0;

    static PainleveScaling case1(double hbar, double k) {
        if (hbar == 0) throw PreconditionError("the P_I scaling needs hbar != 0");
        if (k == 0) throw PreconditionError("the P_I scaling needs a nonzero linear coefficient");
        PainleveScaling s;
        s.beta = (k > 0 ? 1.0 : -1.0) * std::pow(std::fabs(k) / std::pow(hbar, 4), 0.2);
        s.alpha = hbar * hbar * s.beta * s.beta;
        return s;
    }
    double z(double x) const { return beta * x; }
    double x(double z) const { return z / beta; }
    double V(double w) const { return alpha * w; }
    double dV(double dw) const { return alpha * beta * dw; }
    double w(double V) const { return V / alpha; }
    double dw(double dV) const { return dV / (alpha * beta); }
};

/// Third derivative of w along a solution, from the partial derivatives of the normal form.
inline double painleve_third(const PainleveSpec& s, double z, double w, double dw) {
    const double d2 = painleve_rhs(s, z, w, dw);
    switch (s.kind) {
    case PainleveKind::PI: return 12 * w * dw + 1;
    case PainleveKind::PII: return w + (6 * w * w + z) * dw;
    case PainleveKind::PIV: {
        const double fz = 4 * w * w + 4 * z * w;
        const double fw = -dw * dw / (2 * w * w) + 4.5 * w * w + 8 * z * w + 2 * (z * z - s.alpha) - s.beta / (w * w);
        return fz + fw * dw + dw / w * d2;
    }
    }
    return 0.0;
}

/// A Painleve solution on an interval, evaluated anywhere in it by quintic Hermite
/// interpolation of (w, w', w'') between integration nodes.
class PainleveFunction {
public:
    PainleveFunction(const PainleveSpec& s, double a, double b, std::size_t intervals) : spec_(s), a_(a), b_(b) {
        if (!(b > a)) throw PreconditionError("empty interval");
        if (intervals < 2) throw PreconditionError("at least two intervals are required");
        h_ = (b - a) / static_cast<double>(intervals);
        const auto nodes = linspace(a, b, intervals);
        w_.assign(nodes.size(), 0.0);
        dw_.assign(nodes.size(), 0.0);
        auto leg = [&](bool forward) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < nodes.size(); ++i)
                if (forward ? nodes[i] >= s.z0 : nodes[i] < s.z0) idx.push_back(i);
            if (!forward) std::reverse(idx.begin(), idx.end());
            if (idx.empty()) return;
            std::vector<double> grid;
            for (std::size_t i : idx) grid.push_back(nodes[i]);
            const auto sol = integrate_along(s, grid);
            if (sol.pole || sol.z.size() != grid.size())
                throw PoleError("pole near z = " + std::to_string(sol.pole_location) + " inside the interval");
            for (std::size_t k = 0; k < idx.size(); ++k) {
                w_[idx[k]] = sol.w[k];
                dw_[idx[k]] = sol.dw[k];
            }
        };
        leg(true);
        leg(false);
    }

    /// w and its first three derivatives at z.
    std::array<double, 4> operator()(double z) const {
        const double slack = 1e-12 * std::max({1.0, std::fabs(a_), std::fabs(b_)});
        if (z < a_ - slack || z > b_ + slack)
            throw DomainError("z = " + std::to_string(z) + " outside the sampled interval");
        const std::size_t n = w_.size() - 1;
        std::size_t i = static_cast<std::size_t>(std::max(0.0, (z - a_) / h_));
        i = std::min(i, n - 1);
        const double z0 = a_ + h_ * static_cast<double>(i), t = (z - z0) / h_;
        const double ddw0 = painleve_rhs(spec_, z0, w_[i], dw_[i]);
        const double ddw1 = painleve_rhs(spec_, z0 + h_, w_[i + 1], dw_[i + 1]);
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5, H1 = t - 6 * t3 + 8 * t4 - 3 * t5,
                     H2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5), H3 = 10 * t3 - 15 * t4 + 6 * t5,
                     H4 = -4 * t3 + 7 * t4 - 3 * t5, H5 = 0.5 * (t3 - 2 * t4 + t5);
        const double D0 = -30 * t2 + 60 * t3 - 30 * t4, D1 = 1 - 18 * t2 + 32 * t3 - 15 * t4,
                     D2 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4), D3 = 30 * t2 - 60 * t3 + 30 * t4,
                     D4 = -12 * t2 + 28 * t3 - 15 * t4, D5 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4);
        const double h = h_, hh = h_ * h_;
        const double w = H0 * w_[i] + H1 * h * dw_[i] + H2 * hh * ddw0 + H3 * w_[i + 1] + H4 * h * dw_[i + 1] +
                         H5 * hh * ddw1;
        const double dw = (D0 * w_[i] + D1 * h * dw_[i] + D2 * hh * ddw0 + D3 * w_[i + 1] + D4 * h * dw_[i + 1] +
                           D5 * hh * ddw1) / h;
        return {w, dw, painleve_rhs(spec_, z, w, dw), painleve_third(spec_, z, w, dw)};
    }

    const PainleveSpec& spec() const { return spec_; }

private:
    static SampledSolution integrate_along(const PainleveSpec& s, const std::vector<double>& grid) {
        OdeOptions o;
        o.abs_tol = o.rel_tol = s.tol;
        o.watch = {0};
        o.initial_step = 1e-3;
        auto f = [&s](const State& x, State& d, double z) {
            d[0] = x[1];
            d[1] = painleve_rhs(s, z, x[0], x[1]);
        };
        return detail::to_sampled(integrate_ode(f, {s.w0, s.dw0}, s.z0, grid.back(), grid, o));
    }

    PainleveSpec spec_;
    double a_, b_, h_ = 0.0;
    std::vector<double> w_, dw_;
};

/// The separated component V with hbar^2 V'' = 6 V^2 + k s on [lo, hi], built from the
/// P_I solution with w(0) = w0, w'(0) = dw0 through the affine scaling; returns V and
/// its first three derivatives in s.
inline std::function<std::array<double, 4>(double)> case1_component(double hbar, double k, double lo, double hi,
                                                                     double w0 = 0.0, double dw0 = 0.0,
                                                                     double tol = 1e-12, std::size_t intervals = 4000) {
    const PainleveScaling sc = PainleveScaling::case1(hbar, k);
    PainleveSpec s;
    s.kind = PainleveKind::PI;
    s.w0 = w0;
    s.dw0 = dw0;
    s.tol = tol;
    const double za = std::min(sc.z(lo), sc.z(hi)), zb = std::max(sc.z(lo), sc.z(hi));
    auto fn = std::make_shared<PainleveFunction>(s, std::min(za, 0.0), std::max(zb, 0.0), intervals);
    return [fn, sc](double x) {
        const auto j = (*fn)(sc.z(x));
        const double a = sc.alpha, b = sc.beta;
        return std::array<double, 4>{a * j[0], a * b * j[1], a * b * b * j[2], a * b * b * b * j[3]};
    };
}

// ---------------------------------------------------------------------------
// classical families

/// A one-variable potential with an optional open lower bound on its domain.
struct OneVariablePotential {
    Expr expr;
    std::string variable = "x";
    std::optional<double> open_lower;

    double operator()(double x) const {
        if (open_lower && !(x > *open_lower))
            throw DomainError("potential is defined only for " + variable + " > " + std::to_string(*open_lower));
        sym::Binding b;
        b.set(variable, x);
        return sym::eval_float(expr, b);
    }
};

/// V(x) = +-c sqrt(x), defined for x > 0.
inline OneVariablePotential classical_case1_potential(const Rational& c, int sign, const std::string& variable = "x") {
    if (sign != 1 && sign != -1) throw PreconditionError("sign must be +1 or -1");
    OneVariablePotential p;
    p.variable = variable;
    p.expr = sym::scale(sym::sqrt(sym::sym(variable)), c * sign);
    p.open_lower = 0.0;
    return p;
}

/// Coefficients a0..a4 of a0 + a1 V + a2 V^2 + a3 V^3 + a4 V^4 as functions of x.
using QuarticFamily = std::function<std::array<double, 5>(double)>;

struct QuarticRoot {
    double value = 0.0;
    int multiplicity = 1;   // size of the root cluster the value was taken from
    bool collision = false; // another real root came within the cluster tolerance on the path
};

namespace detail {

inline std::vector<std::complex<double>> quartic_roots(const std::array<double, 5>& a) {
    int deg = 4;
    while (deg > 0 && a[static_cast<std::size_t>(deg)] == 0) --deg;
    if (deg == 0) throw DomainError("quartic has no roots (constant polynomial)");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) m(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) m(i, deg - 1) = -a[static_cast<std::size_t>(i)] / a[static_cast<std::size_t>(deg)];
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    std::vector<std::complex<double>> out;
    for (int i = 0; i < deg; ++i) out.push_back(es.eigenvalues()[i]);
    return out;
}

inline double poly_eval(const std::array<double, 5>& a, double v, double* dv = nullptr) {
    double p = 0.0, d = 0.0;
    for (int k = 4; k >= 0; --k) {
        d = d * v + p;
        p = p * v + a[static_cast<std::size_t>(k)];
    }
    if (dv) *dv = d;
    return p;
}

struct RootCluster {
    double value;
    int size;
};

/// Real roots, with nearby roots (including complex pairs with tiny imaginary parts)
/// merged into clusters whose mean is the estimate.
inline std::vector<RootCluster> real_root_clusters(const std::array<double, 5>& a, double tol) {
    auto roots = quartic_roots(a);
    std::vector<bool> used(roots.size(), false);
    std::vector<RootCluster> out;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i]) continue;
        std::complex<double> sum = roots[i];
        int n = 1;
        used[i] = true;
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (!used[j] && std::abs(roots[j] - roots[i]) < tol * std::max(1.0, std::abs(roots[i]))) {
                used[j] = true;
                sum += roots[j];
                ++n;
            }
        }
        const std::complex<double> mean = sum / static_cast<double>(n);
        if (std::fabs(mean.imag()) > tol * std::max(1.0, std::abs(mean))) continue;
        double v = mean.real();
        if (n == 1) {
            for (int it = 0; it < 3; ++it) {
                double d = 0.0;
                const double p = poly_eval(a, v, &d);
                if (d == 0) break;
                v -= p / d;
            }
        }
        out.push_back({v, n});
    }
    return out;
}

} // namespace detail

/// The real root of the quartic at x on the branch through (x0, v0), followed by
/// continuation over `steps` equal steps; never chosen by root index.
inline QuarticRoot classical_case2_potential(const QuarticFamily& q, double x0, double v0, double x, int steps = 200,
                                             double cluster_tol = 1e-3) {
    if (steps < 1) throw PreconditionError("continuation needs at least one step");
    QuarticRoot r;
    double v = v0;
    const int n = x == x0 ? 0 : steps;
    for (int i = 0; i <= n; ++i) {
        const double xi = n == 0 ? x : x0 + (x - x0) * static_cast<double>(i) / static_cast<double>(n);
        const auto clusters = detail::real_root_clusters(q(xi), cluster_tol);
        if (clusters.empty()) throw DomainError("quartic has no real root at x = " + std::to_string(xi));
        const auto best = std::min_element(clusters.begin(), clusters.end(), [&](const auto& a, const auto& b) {
            return std::fabs(a.value - v) < std::fabs(b.value - v);
        });
        v = best->value;
        r.multiplicity = best->size;
        if (best->size > 1) r.collision = true;
    }
    r.value = v;
    return r;
}

} // namespace thirdint
