#include <thirdint/determine.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace thirdint;
using sym::parse;

namespace thirdint::sym {
void PrintTo(const Expr& e, std::ostream* os) { *os << to_string(e); }
} // namespace thirdint::sym

namespace {

const Coeffs10 kOscA = [] {
    Coeffs10 A;
    A["A120"] = Rational(1, 2);
    A["A102"] = Rational(1, 2);
    return A;
}();

Coeffs10 random_coeffs(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-6, 6), den(1, 5);
    Coeffs10 A;
    for (std::size_t i = 0; i < 10; ++i) {
        A[i] = Rational(num(rng), den(rng));
        A[i].canonicalize();
    }
    return A;
}

// Leading terms written out from the cubic symbol sum A_jkl L^j p1^k p2^l, expanded by hand.
std::array<double, 4> hand_F(const Coeffs10& A, double x, double y) {
    auto a = [&](const char* n) { return A[n].get_d(); };
    return {-a("A300") * y * y * y + a("A210") * y * y - a("A120") * y + a("A030"),
            3 * a("A300") * x * y * y - 2 * a("A210") * x * y + a("A201") * y * y + a("A120") * x - a("A111") * y +
                a("A021"),
            -3 * a("A300") * x * x * y + a("A210") * x * x - 2 * a("A201") * x * y + a("A111") * x - a("A102") * y +
                a("A012"),
            a("A300") * x * x * x + a("A201") * x * x + a("A102") * x + a("A003")};
}

} // namespace

TEST(GResiduals, ZeroPotentialZeroGauge) {
    std::mt19937_64 rng(1);
    EXPECT_TRUE(g_residuals(Expr(), random_coeffs(rng), Expr(), Expr()).all_zero());
}

TEST(GResiduals, OscillatorCandidate) {
    const auto r = g_residuals(parse("(x^2 + y^2)/2"), kOscA, parse("-(x^2*y + y^3)/2"), parse("(x*y^2 + x^3)/2"));
    EXPECT_TRUE(r.all_zero());
}

TEST(GResiduals, OscillatorWithoutGauge) {
    const auto r = g_residuals(parse("(x^2 + y^2)/2"), kOscA, Expr(), Expr());
    // -(3 F1 V_1 + F2 V_2) with F1 = -y/2, F2 = x/2
    EXPECT_EQ(r.r[0], parse("x1*x2"));
}

TEST(GResiduals, RejectsMomentumDependentGauge) {
    EXPECT_THROW((void)g_residuals(Expr(), kOscA, parse("p1"), Expr()), Error);
}

TEST(ZerothResidual, OscillatorClassical) {
    EXPECT_TRUE(zeroth_residual(parse("(x^2 + y^2)/2"), kOscA, parse("-(x^2*y + y^3)/2"), parse("(x*y^2 + x^3)/2"),
                                Expr())
                    .is_zero());
}

TEST(ZerothResidual, ConstantGaugeWithZeroPotential) {
    std::mt19937_64 rng(2);
    const Coeffs10 A = random_coeffs(rng);
    ASSERT_TRUE(g_residuals(Expr(), A, Expr(3), Expr(-2)).all_zero());
    EXPECT_TRUE(zeroth_residual(Expr(), A, Expr(3), Expr(-2), parse("1/3")).is_zero());
}

TEST(ZerothResidual, HbarCorrectionTerms) {
    // A300 = 1 with V = x: only the correction -hbar^2(-2 A300 x2) V_1 survives alongside g1 V_1
    const Expr r = zeroth_residual(parse("x"), Coeffs10::unit("A300"), Expr(), Expr(), Expr(Rational(1, 2)));
    EXPECT_EQ(r, parse("x2/2"));
}

TEST(ZerothResidual, CaseOneReducesToOneVariable) {
    // A030 = 1, V = V1(x): second-order equations give g1 = 3 F1 V1 integrated, g2 = 0
    const Expr V1 = parse("x^3 - 2*x");
    const Expr g1 = parse("3*(x^3 - 2*x)");
    const Expr r = zeroth_residual(V1, Coeffs10::unit("A030"), g1, Expr(), sym::sym("hbar"));
    ASSERT_TRUE(g_residuals(V1, Coeffs10::unit("A030"), g1, Expr()).all_zero());
    EXPECT_FALSE(r.depends_on("x2"));
    // g1 V1' - hbar^2/4 V1''' with V1 = x^3 - 2x
    EXPECT_EQ(r, parse("3*(x1^3 - 2*x1)*(3*x1^2 - 2) - 6*hbar^2/4"));
}

TEST(LinearCompat, SeparableWithA030) {
    EXPECT_TRUE(linear_compat(parse("x^4 + sin(y) + y^3"), Coeffs10::unit("A030")).is_zero());
}

TEST(LinearCompat, LinearPotentialWithA300) { EXPECT_EQ(linear_compat(parse("x"), Coeffs10::unit("A300")), parse("36*x2")); }

TEST(LinearCompat, ZeroPotential) {
    std::mt19937_64 rng(3);
    EXPECT_TRUE(linear_compat(Expr(), random_coeffs(rng)).is_zero());
}

TEST(LinearCompat, MatchesFiniteDifferenceElimination) {
    // g eliminated from g1_1 = a, g1_2 + g2_1 = b, g2_2 = c: b_12 - a_22 - c_11 = 0
    const Expr V = parse("sin(x)*cos(y) + x^3*y/5 + y^4/7");
    const Expr Vx = sym::diff(V, "x"), Vy = sym::diff(V, "y");
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> box(-1.2, 1.2);
    for (int k = 0; k < 20; ++k) {
        const Coeffs10 A = random_coeffs(rng);
        const Expr L = linear_compat(V, A);
        auto abc = [&](double x, double y) {
            const auto F = hand_F(A, x, y);
            sym::Binding b{{"x", x}, {"y", y}};
            const double v1 = sym::eval_float(Vx, b), v2 = sym::eval_float(Vy, b);
            return std::array<double, 3>{3 * F[0] * v1 + F[1] * v2, 2 * (F[1] * v1 + F[2] * v2), F[2] * v1 + 3 * F[3] * v2};
        };
        const double x = box(rng), y = box(rng);
        auto stencil = [&](double h) {
            const auto c0 = abc(x, y);
            const double a22 = (abc(x, y + h)[0] - 2 * c0[0] + abc(x, y - h)[0]) / (h * h);
            const double c11 = (abc(x + h, y)[2] - 2 * c0[2] + abc(x - h, y)[2]) / (h * h);
            const double b12 =
                (abc(x + h, y + h)[1] - abc(x + h, y - h)[1] - abc(x - h, y + h)[1] + abc(x - h, y - h)[1]) / (4 * h * h);
            return b12 - a22 - c11;
        };
        const double fd = (4 * stencil(1e-3) - stencil(2e-3)) / 3;
        const double got = sym::eval_float(L, sym::Binding{{"x1", x}, {"x2", y}});
        EXPECT_NEAR(got, fd, 1e-6 * std::max(1.0, std::fabs(fd)));
    }
}

TEST(ChartCompat, PolarD0IsIdenticallyZero) {
    EXPECT_TRUE(chart_compat(Chart::polar(), Coeffs10::unit("A300"), parse("r^5 + 1/r"), parse("sin(3*th)")).is_zero());
}

TEST(ChartCompat, CartesianA102) {
    const Expr r = chart_compat(Chart::cartesian(), Coeffs10::unit("A102"), parse("x^5"), parse("y^4"));
    const Expr want = parse("60*x^2*y");
    EXPECT_EQ(r, want);
}

TEST(ChartCompat, ZeroComponents) {
    std::mt19937_64 rng(5);
    for (const Chart& c : {Chart::cartesian(), Chart::polar(), Chart::parabolic(), Chart::elliptic()})
        EXPECT_TRUE(chart_compat(c, random_coeffs(rng), Expr(), Expr()).is_zero()) << c.name;
}

TEST(ChartCompat, SingularLociRejected) {
    const Coeffs10 A = Coeffs10::unit("A111");
    EXPECT_THROW((void)chart_compat_at(Chart::elliptic(), A, parse("u^2"), parse("v^2"), {1.0, 2.0}), SingularityError);
    EXPECT_THROW((void)chart_compat_at(Chart::elliptic(), A, parse("u^2"), parse("v^2"), {0.5, 1.0}), SingularityError);
    EXPECT_THROW((void)chart_compat_at(Chart::parabolic(), A, parse("xi^2"), parse("eta^2"), {0.0, 1.0}), SingularityError);
    EXPECT_NO_THROW((void)chart_compat_at(Chart::elliptic(), A, parse("u^2"), parse("v^2"), {0.5, 2.0}));
}

TEST(ChartCompat, CartesianAgreesWithGeneralConditionExactly) {
    std::mt19937_64 rng(6);
    const Expr V1 = parse("x^5 - 3*x^2"), V2 = parse("2*y^4 + y");
    for (int k = 0; k < 10; ++k) {
        const Coeffs10 A = random_coeffs(rng);
        const Expr chart = chart_compat(Chart::cartesian(), A, V1, V2);
        const Expr general = linear_compat(V1 + V2, A);
        for (int p = 0; p < 5; ++p) {
            const Rational x(static_cast<long>(rng() % 11) - 5, 3), y(static_cast<long>(rng() % 7) - 3, 2);
            const Rational a = sym::eval_exact(chart, sym::Binding{{"x", x}, {"y", y}});
            const Rational b = sym::eval_exact(general, sym::Binding{{"x1", x}, {"x2", y}});
            EXPECT_EQ(a, b);
        }
    }
}

TEST(Consistency, CartesianMultiplierIsOne) {
    std::mt19937_64 rng(7);
    const auto rep = compat_consistency(Chart::cartesian(), random_coeffs(rng), {{0.3, -0.4}, {1.2, 0.7}, {-0.8, 1.5}}, 6, 1);
    for (const auto& p : rep.points) {
        EXPECT_FALSE(p.degenerate);
        EXPECT_NEAR(p.multiplier, 1.0, 1e-12);
    }
    EXPECT_LT(rep.max_residual(), 1e-12);
}

TEST(Consistency, ParabolicRandomCoefficients) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(0.3, 2.0);
    std::vector<Point2> pts;
    for (int k = 0; k < 20; ++k) pts.push_back({pos(rng), pos(rng)});
    const auto rep = compat_consistency(Chart::parabolic(), random_coeffs(rng), pts, 10, 2);
    EXPECT_FALSE(rep.all_degenerate());
    EXPECT_LT(rep.max_residual(), 1e-9);
}

TEST(Consistency, ZeroCoefficientsAreDegenerate) {
    const auto rep = compat_consistency(Chart::elliptic(), Coeffs10{}, {{0.3, 1.4}, {-0.6, 2.2}}, 4, 3);
    EXPECT_TRUE(rep.all_degenerate());
}

TEST(ReduceToOde, CartesianA102) {
    const auto spec = reduce_to_ode(Chart::cartesian(), Coeffs10::unit("A102"), 0, Rational(1));
    EXPECT_FALSE(spec.degenerate);
    EXPECT_FALSE(spec.c[3].is_zero());
    EXPECT_TRUE(spec.c[0].is_zero() && spec.c[1].is_zero() && spec.c[2].is_zero());
    const auto sols = polynomial_solutions(spec, 6);
    ASSERT_EQ(sols.size(), 3u);
    sym::RMatrix m;
    for (const auto& s : sols) {
        sym::RVector row(3);
        for (const auto& [ex, c] : sym::poly_coeffs(s, {"x"})) {
            ASSERT_LE(ex[0], 2);
            row[static_cast<std::size_t>(ex[0])] = *c.constant_value();
        }
        m.push_back(row);
    }
    EXPECT_EQ(sym::rank(m, 3), 3u);
}

TEST(ReduceToOde, GenericLeadingCoefficientIsF3) {
    std::mt19937_64 rng(9);
    const Coeffs10 A = random_coeffs(rng);
    const Rational y0(2, 3);
    const auto spec = reduce_to_ode(Chart::cartesian(), A, 0, y0);
    const auto F3 = sym::subs(leading_terms(Chart::cartesian(), A).F[2], "y", Expr(y0));
    EXPECT_EQ(spec.c[3], -F3);
    for (const auto& [ex, c] : sym::poly_coeffs(spec.c[3], {"x"})) EXPECT_LE(ex[0], 2);
}

TEST(ReduceToOde, CaseTwoGivesQuadraticV2) {
    const auto spec = reduce_to_ode(Chart::cartesian(), Coeffs10::unit("A120"), 1, Rational(1));
    EXPECT_EQ(spec.function, "V2");
    EXPECT_EQ(spec.fixed_variable, "x");
    EXPECT_EQ(spec.c[3], Expr(-1));
    const auto sols = polynomial_solutions(spec, 5);
    EXPECT_EQ(sols.size(), 3u);
    for (const auto& s : sols) EXPECT_TRUE(sym::diff(s, "y", 3).is_zero());
}

TEST(ReduceToOde, LinearInTarget) {
    std::mt19937_64 rng(10);
    const auto spec = reduce_to_ode(Chart::polar(), random_coeffs(rng), 0, Rational(1, 2));
    const Expr y = parse("r^3 + 2/r");
    const Expr base = spec.apply(Expr());
    EXPECT_EQ(spec.apply(sym::scale(y, Rational(2))) - base, sym::scale(spec.apply(y) - base, Rational(2)));
}

TEST(ReduceToOde, UnknownConstantsAreNamed) {
    std::mt19937_64 rng(11);
    const auto spec = reduce_to_ode(Chart::cartesian(), random_coeffs(rng), 0, Rational(1));
    ASSERT_FALSE(spec.inhomogeneity.empty());
    for (const auto& [name, e] : spec.inhomogeneity) {
        EXPECT_EQ(name[0], 'K');
        EXPECT_FALSE(e.is_zero());
    }
}

TEST(ReduceToOde, PolarCaseOneIsDegenerate) {
    EXPECT_TRUE(reduce_to_ode(Chart::polar(), Coeffs10::unit("A300"), 0, Rational(1)).degenerate);
}

TEST(Kernel, CartesianF2F3) {
    const auto r = vanishing_kernel(Chart::cartesian(), {2, 3});
    EXPECT_EQ(r.dimension, 2u);
    sym::RVector a(10), b(10);
    a[Coeffs10::index("A030")] = 1;
    b[Coeffs10::index("A003")] = 1;
    EXPECT_TRUE(same_span(r.basis, {a, b}));
}

TEST(Kernel, ParabolicF3) { EXPECT_EQ(vanishing_kernel(Chart::parabolic(), {3}).dimension, 0u); }

TEST(Kernel, EllipticF2AndF3) {
    EXPECT_EQ(vanishing_kernel(Chart::elliptic(), {2}).dimension, 0u);
    EXPECT_EQ(vanishing_kernel(Chart::elliptic(), {3}).dimension, 0u);
}

TEST(Kernel, PolarF1F3) {
    const auto r = vanishing_kernel(Chart::polar(), {1, 3});
    EXPECT_EQ(r.dimension, 2u);
    PolarCoeffs b0, d0;
    b0["B0"] = 1;
    d0["D0"] = 1;
    const Coeffs10 B = polar_to_cartesian_coeffs(b0), D = polar_to_cartesian_coeffs(d0);
    EXPECT_TRUE(same_span(r.basis, {sym::RVector(B.a.begin(), B.a.end()), sym::RVector(D.a.begin(), D.a.end())}));
}

TEST(Kernel, BasisAnnihilatesSelectedTerms) {
    for (const Chart& c : {Chart::cartesian(), Chart::polar(), Chart::parabolic(), Chart::elliptic()})
        for (const std::vector<int>& sel : {std::vector<int>{1}, {4}, {2, 3}, {1, 3}, {1, 4}}) {
            const auto r = vanishing_kernel(c, sel);
            for (const auto& v : r.basis) {
                const auto lt = leading_terms(c, to_coeffs(v));
                for (int j : sel) EXPECT_TRUE(lt.F[static_cast<std::size_t>(j - 1)].is_zero()) << c.name << " F" << j;
            }
        }
}

TEST(Kernel, SampledAgreesWithSymbolic) {
    for (const Chart& c : {Chart::cartesian(), Chart::polar(), Chart::parabolic(), Chart::elliptic()})
        for (const std::vector<int>& sel : {std::vector<int>{2}, {3}, {2, 3}, {1, 3}, {1, 2, 3, 4}}) {
            const auto a = vanishing_kernel_symbolic(c, sel), b = vanishing_kernel_sampled(c, sel, 14, 21);
            EXPECT_EQ(a.dimension, b.dimension) << c.name;
            EXPECT_TRUE(same_span(a.basis, b.basis)) << c.name;
        }
}
