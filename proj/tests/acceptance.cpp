// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include <thirdint/thirdint.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

using namespace thirdint;
using sym::parse;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

Coeffs10 random_coeffs(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-6, 6), den(1, 5);
    Coeffs10 A;
    for (std::size_t i = 0; i < 10; ++i) {
        A[i] = Rational(num(rng), den(rng));
        A[i].canonicalize();
    }
    return A;
}

sym::RVector vec(const Coeffs10& A) { return sym::RVector(A.a.begin(), A.a.end()); }

const Coeffs10 kOscA = [] {
    Coeffs10 A;
    A["A120"] = Rational(1, 2);
    A["A102"] = Rational(1, 2);
    return A;
}();

Outcome elliptic_kernel() {
    Clock t;
    std::ostringstream d;
    bool ok = true;
    for (int j : {2, 3}) {
        const auto s = vanishing_kernel_symbolic(Chart::elliptic(), {j});
        const auto n = vanishing_kernel_sampled(Chart::elliptic(), {j});
        d << "F" << j << " symbolic " << s.dimension << " sampled " << n.dimension << "; ";
        ok = ok && s.dimension == 0 && n.dimension == 0;
    }
    d << fmt(t.seconds()) << " s";
    return {ok && t.seconds() < 30, d.str()};
}

Outcome parabolic_kernel() {
    const auto a = vanishing_kernel(Chart::parabolic(), {2}).dimension;
    const auto b = vanishing_kernel(Chart::parabolic(), {3}).dimension;
    return {a == 0 && b == 0, "F2 " + std::to_string(a) + ", F3 " + std::to_string(b)};
}

Outcome cartesian_case1() {
    const auto r = vanishing_kernel(Chart::cartesian(), {2, 3});
    const bool span = same_span(r.basis, {vec(Coeffs10::unit("A030")), vec(Coeffs10::unit("A003"))});
    return {r.dimension == 2 && span, "dimension " + std::to_string(r.dimension) + (span ? ", basis A030, A003" : ", wrong basis")};
}

Outcome polar_case1() {
    const auto r = vanishing_kernel(Chart::polar(), {1, 3});
    // images of the basis in the polar dictionary must span the B0 and D0 directions exactly
    sym::RMatrix images;
    for (const auto& v : r.basis) {
        const PolarCoeffs P = cartesian_to_polar_coeffs(to_coeffs(v));
        images.push_back(sym::RVector(P.c.begin(), P.c.end()));
    }
    PolarCoeffs b0, d0;
    b0["B0"] = 1;
    d0["D0"] = 1;
    const bool span = same_span(images, {sym::RVector(b0.c.begin(), b0.c.end()), sym::RVector(d0.c.begin(), d0.c.end())});
    return {r.dimension == 2 && span, "dimension " + std::to_string(r.dimension) + (span ? ", images span B0, D0" : ", wrong images")};
}

Outcome divergence_chain() {
    Clock t;
    std::mt19937_64 rng(2024);
    int bad = 0;
    for (int k = 0; k < 100; ++k) {
        const auto lt = leading_terms(Chart::cartesian(), random_coeffs(rng));
        for (std::size_t j = 1; j < 4; ++j)
            if (!(sym::diff(lt.F[j], "x") + sym::diff(lt.F[j - 1], "y")).is_zero()) ++bad;
    }
    return {bad == 0 && t.seconds() < 5, std::to_string(bad) + " nonzero of 300; " + fmt(t.seconds()) + " s"};
}

std::vector<Point2> regular_points(const Chart& c, int count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> a, b;
    switch (c.kind) {
    case ChartKind::Cartesian: a = b = std::uniform_real_distribution<double>(-2, 2); break;
    case ChartKind::Polar:
        a = std::uniform_real_distribution<double>(0.3, 2);
        b = std::uniform_real_distribution<double>(-3, 3);
        break;
    case ChartKind::Parabolic: a = b = std::uniform_real_distribution<double>(0.3, 2); break;
    case ChartKind::Elliptic:
        a = std::uniform_real_distribution<double>(-0.95, 0.95);
        b = std::uniform_real_distribution<double>(1.05, 2.5);
        break;
    }
    std::vector<Point2> out;
    while (static_cast<int>(out.size()) < count) {
        const Point2 q{a(rng), b(rng)};
        try {
            check_regular(c, q, 1e-3);
            out.push_back(q);
        } catch (const Error&) {
        }
    }
    return out;
}

Outcome chart_consistency() {
    Clock t;
    std::mt19937_64 rng(6);
    std::ostringstream d;
    bool ok = true;
    for (const Chart& c : {Chart::cartesian(), Chart::polar(), Chart::parabolic(), Chart::elliptic()}) {
        const CompatComparator cmp(c);
        double worst = 0.0;
        int degenerate = 0;
        for (int k = 0; k < 20; ++k) {
            const auto rep = compat_consistency(cmp, random_coeffs(rng), regular_points(c, 20, rng), 10, rng());
            worst = std::max(worst, rep.max_residual());
            if (rep.all_degenerate()) ++degenerate;
        }
        ok = ok && worst < 1e-9 && degenerate == 0;
        d << c.name << " " << fmt(worst) << "; ";
    }
    d << fmt(t.seconds()) << " s";
    return {ok && t.seconds() < 300, d.str()};
}

Outcome oscillator_end_to_end() {
    const Expr V = parse("(x^2 + y^2)/2"), g1 = parse("-(x^2*y + y^3)/2"), g2 = parse("(x*y^2 + x^3)/2");
    const bool residuals = g_residuals(V, kOscA, g1, g2).all_zero() && zeroth_residual(V, kOscA, g1, g2, Expr()).is_zero();
    const Expr H = free_hamiltonian() + detail::cartesian_vars(V);
    const Expr X = build_integral({kOscA, g1, g2, 0.0});
    const bool commute = poisson_bracket(H, X).is_zero();
    const PhaseState s0{0.3, -0.2, 0.5, 0.7};
    const auto rep = trajectory_drift(H, {H, parse("p1^2/2 + x1^2/2"), X}, s0, 50.0, 0.1, 1e-10);
    double drift = 0.0;
    for (double v : rep.max_drift) drift = std::max(drift, v);
    const Expr Xbad = build_integral({kOscA, g1 + parse("x/10"), g2, 0.0});
    const double control = trajectory_drift(H, {Xbad}, s0, 10.0, 0.1, 1e-10).max_drift[0];
    const bool ok = residuals && commute && !rep.truncated && drift < 1e-8 && control > 1e-3;
    return {ok, std::string("residuals ") + (residuals ? "0" : "nonzero") + ", {H,X} " + (commute ? "0" : "nonzero") +
                    ", drift " + fmt(drift) + ", control " + fmt(control)};
}

Outcome gauge_recovery() {
    SeparablePotential W{Chart::cartesian(), parse("x^2/2"), parse("y^2/2"), {}};
    const Window win{-1, 1, -1, 1};
    const auto a = solve_g_numeric(W, kOscA, win, {0.5, -0.25}, 201);
    const auto b = solve_g_numeric(W, kOscA, win, {-0.7, 0.9}, 201);
    auto G1 = [](double x, double y) { return -(x * x * y + y * y * y) / 2; };
    auto G2 = [](double x, double y) { return (x * y * y + x * x * x) / 2; };
    double err = 0.0, scale = 0.0, shift = 0.0;
    const double c1 = a.g1[0][0] - b.g1[0][0], c2 = a.g2[0][0] - b.g2[0][0];
    for (std::size_t j = 0; j < a.y.size(); ++j)
        for (std::size_t i = 0; i < a.x.size(); ++i) {
            const double x = a.x[i], y = a.y[j], bx = a.basepoint[0], by = a.basepoint[1];
            const double e1 = G1(x, y) - G1(bx, by), e2 = G2(x, y) - G2(bx, by);
            err = std::max({err, std::fabs(a.g1[j][i] - e1), std::fabs(a.g2[j][i] - e2)});
            scale = std::max({scale, std::fabs(e1), std::fabs(e2)});
            shift = std::max({shift, std::fabs(a.g1[j][i] - b.g1[j][i] - c1), std::fabs(a.g2[j][i] - b.g2[j][i] - c2)});
        }
    const double rel = err / scale;
    return {rel < 1e-6 && shift < 1e-7, "relative error " + fmt(rel) + ", base-point deviation " + fmt(shift)};
}

Outcome case2_reduction() {
    std::ostringstream d;
    bool ok = true;
    for (const Rational x : {Rational(1), Rational(-3, 2), Rational(5, 7)}) {
        const auto spec = reduce_to_ode(Chart::cartesian(), Coeffs10::unit("A120"), 1, x);
        const bool third = spec.c[0].is_zero() && spec.c[1].is_zero() && spec.c[2].is_zero() && !spec.c[3].is_zero() &&
                           spec.inhomogeneity.empty() && !spec.degenerate;
        const auto sols = polynomial_solutions(spec, 6);
        std::vector<sym::RVector> rows;
        bool low = true;
        for (const Expr& e : sols) {
            sym::RVector r(10, Rational(0));
            for (const auto& [ex, k] : sym::poly_coeffs(e, {spec.variable})) {
                if (ex[0] > 2) low = false;
                else r[static_cast<std::size_t>(ex[0])] = sym::eval_exact(k, {});
            }
            rows.push_back(r);
        }
        std::vector<sym::RVector> units;
        for (std::size_t i = 0; i < 3; ++i) {
            sym::RVector u(10, Rational(0));
            u[i] = 1;
            units.push_back(u);
        }
        const bool space = low && same_span(rows, units);
        ok = ok && third && space;
        d << "x=" << x.get_str() << ": " << (third ? "V2'''=0" : "not third order") << ", " << sols.size() << " solutions; ";
    }
    return {ok, d.str() + "space {1, y, y^2}"};
}

// Series for w'' = 6 w^2 + z about 0 from w(0) = w'(0) = 0.
double taylor_p1(double z, int order) {
    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    for (int m = 2; m <= order; ++m) {
        const int n = m - 2;
        double sq = 0.0;
        for (int k = 0; k <= n; ++k) sq += c[static_cast<std::size_t>(k)] * c[static_cast<std::size_t>(n - k)];
        c[static_cast<std::size_t>(m)] = (6 * sq + (n == 1 ? 1.0 : 0.0)) / (m * (m - 1));
    }
    double v = 0.0;
    for (int m = order; m >= 0; --m) v = v * z + c[static_cast<std::size_t>(m)];
    return v;
}

PainleveSpec p1(double z1, std::size_t samples, double tol) {
    PainleveSpec s;
    s.kind = PainleveKind::PI;
    s.z1 = z1;
    s.samples = samples;
    s.tol = tol;
    return s;
}

template <class Rhs>
double fd_residual(const SampledSolution& s, Rhs rhs) {
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < s.z.size(); ++i) {
        const double h = s.z[i + 1] - s.z[i];
        m = std::max(m, std::fabs((s.w[i + 1] - 2 * s.w[i] + s.w[i - 1]) / (h * h) - rhs(s.z[i], s.w[i])));
    }
    return m;
}

Outcome special_functions() {
    std::ostringstream d;
    PainleveSpec z;
    z.kind = PainleveKind::PII;
    z.z1 = 5;
    bool zero = true;
    for (double w : integrate_painleve(z).w) zero = zero && w == 0.0;
    d << "P2 zero " << (zero ? "exact" : "not exact");

    double taylor = 0.0;
    for (double z1 : {0.1, -0.1}) {
        const auto sol = integrate_painleve(p1(z1, 20, 1e-12));
        for (std::size_t i = 1; i < sol.z.size(); ++i) {
            const double want = taylor_p1(sol.z[i], 8);
            taylor = std::max(taylor, std::fabs(sol.w[i] - want) / std::fabs(want));
        }
    }
    d << ", P1 vs Taylor " << fmt(taylor);

    const double fd = fd_residual(integrate_painleve(p1(1.0, 1000, 1e-10)),
                                  [](double zz, double w) { return 6 * w * w + zz; });
    d << ", P1 FD residual " << fmt(fd);

    const auto wp = weierstrass_p({1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 200, 1e-10});
    d << ", WP drift " << fmt(wp.max_drift);

    double degen = 0.0;
    const auto dg = weierstrass_p({0.0, 0.0, 0.0, 1.0, -2.0, 3.0, 100, 1e-12});
    for (std::size_t i = 0; i < dg.solution.z.size(); ++i) {
        const double zz = dg.solution.z[i], want = 1 / ((zz + 1) * (zz + 1));
        degen = std::max(degen, std::fabs(dg.solution.w[i] - want) / want);
    }
    d << ", degenerate " << fmt(degen);

    // halving the tolerance: P1 endpoint error, P2 endpoint error, WP drift
    const double p1ref = integrate_painleve(p1(1.5, 1, 1e-14)).w.back();
    PainleveSpec q;
    q.kind = PainleveKind::PII;
    q.alpha = 0.5;
    q.w0 = 0.2;
    q.dw0 = -0.1;
    q.z1 = 1;
    q.samples = 1;
    q.tol = 1e-14;
    const double p2ref = integrate_painleve(q).w.back();
    bool monotone = true;
    std::array<double, 3> last{1e300, 1e300, 1e300};
    for (double tol = 1e-8; tol >= 1e-8 / 64; tol /= 2) {
        q.tol = tol;
        const std::array<double, 3> now{std::fabs(integrate_painleve(p1(1.5, 1, tol)).w.back() - p1ref),
                                        std::fabs(integrate_painleve(q).w.back() - p2ref),
                                        weierstrass_p({1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 1, tol}).max_drift};
        for (std::size_t k = 0; k < 3; ++k) monotone = monotone && now[k] < last[k];
        last = now;
    }
    d << ", halving " << (monotone ? "monotone" : "not monotone");
    const bool ok = zero && taylor < 1e-8 && fd < 1e-6 && wp.max_drift < 1e-10 && degen < 1e-8 && monotone;
    return {ok, d.str()};
}

// Zeroth-order grid residual for a Cartesian potential whose components come from P_I.
double case1_residual(const Coeffs10& A, const Component& c1, const Component& c2, const Window& win, double hbar) {
    SeparablePotential W{Chart::cartesian(), c1, c2, {}};
    auto g = solve_g_numeric(W, A, win, {win.cx(), win.cy()}, 201);
    const auto fit = fit_killing_gauge(g, W, A, hbar);
    return std::max(g.max_residual(), fit.residual);
}

Outcome case1_pipeline() {
    const double hbar = 0.8, sigma = 1.7;
    const Window win{-0.5, 0.5, -0.5, 0.5};
    auto comp = [&](double k, double lo, double hi, double w0, double dw0) {
        return Component(SampledComponent(case1_component(hbar, k, lo, hi, w0, dw0, 1e-12)));
    };
    Coeffs10 coupled;
    coupled["A030"] = 1;
    coupled["A003"] = 1;
    // A003 = 1 alone: hbar^2 V1'' = 6 V1^2 + sigma x, V2 = 0
    const double literal = case1_residual(Coeffs10::unit("A003"), comp(sigma, win.x0, win.x1, 0.1, -0.2), Expr(), win, hbar);
    // both: the second component solves hbar^2 V2'' = 6 V2^2 - sigma y
    const double both = case1_residual(coupled, comp(sigma, win.x0, win.x1, 0.1, -0.2), comp(-sigma, win.y0, win.y1, 0.05, 0.1),
                                       win, hbar);
    const double control = case1_residual(coupled, comp(-sigma, win.x0, win.x1, 0.1, -0.2),
                                          comp(-sigma, win.y0, win.y1, 0.05, 0.1), win, hbar);
    const bool ok = literal < 1e-5 && both < 1e-5 && control > 1e-3;
    return {ok, "A003 only " + fmt(literal) + ", A030+A003 " + fmt(both) + ", wrong sign of sigma " + fmt(control)};
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"elliptic F2, F3 kernels are zero", elliptic_kernel},
        {"parabolic F2, F3 kernels are zero", parabolic_kernel},
        {"cartesian case 1 kernel", cartesian_case1},
        {"polar case 1 kernel", polar_case1},
        {"divergence chain", divergence_chain},
        {"chart consistency", chart_consistency},
        {"oscillator end to end", oscillator_end_to_end},
        {"gauge field quadrature", gauge_recovery},
        {"case 2 reduction", case2_reduction},
        {"special functions", special_functions},
        {"case 1 quantum pipeline", case1_pipeline},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
