#include <thirdint/thirdint.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>

namespace {

using namespace thirdint;
using io::json;

constexpr int kOk = 0;
constexpr int kMathFailure = 1;
constexpr int kUsage = 2;

std::vector<int> parse_selection(const std::string& text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        std::string item = text.substr(pos, end - pos);
        if (item.size() != 2 || (item[0] != 'F' && item[0] != 'f') || item[1] < '1' || item[1] > '4')
            throw io::SchemaError("selection entries must be F1..F4, got '" + item + "'");
        out.push_back(item[1] - '0');
        pos = end + 1;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Chart chart_arg(const std::string& name) {
    try {
        return Chart::from_name(name);
    } catch (const SymbolError& e) {
        throw io::SchemaError(e.what());
    }
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

struct KernelArgs {
    std::string chart, select, method = "symbolic";
    int points = 16;
    std::uint64_t seed = 7;
};

int cmd_kernel(const KernelArgs& a) {
    const Chart c = chart_arg(a.chart);
    const auto sel = parse_selection(a.select);
    KernelReport r;
    if (a.method == "symbolic")
        r = vanishing_kernel_symbolic(c, sel);
    else if (a.method == "sampled")
        r = vanishing_kernel_sampled(c, sel, a.points, a.seed);
    else
        throw io::SchemaError("method must be symbolic or sampled");
    emit(io::to_json(r));
    return kOk;
}

// ---------------------------------------------------------------------------

struct CheckArgs {
    std::string candidate;
    std::optional<std::string> hbar;
};

json residual_entry(const std::string& name, const Expr& r) {
    return {{"equation", name}, {"residual", sym::to_string(r)}, {"zero", r.is_zero()}};
}

int cmd_check(const CheckArgs& a) {
    const auto job = io::candidate_from(io::read_json_file(a.candidate));
    const Expr hbar = a.hbar ? Expr(io::parse_rational(*a.hbar)) : job.hbar;
    const auto g = g_residuals(job.V, job.A, job.g1, job.g2);
    json eqs = json::array();
    static const char* names[] = {"second_order_1", "second_order_2", "second_order_3"};
    for (int i = 0; i < 3; ++i) eqs.push_back(residual_entry(names[i], g.r[static_cast<std::size_t>(i)]));
    eqs.push_back(residual_entry("zeroth_order", zeroth_residual(job.V, job.A, job.g1, job.g2, hbar)));
    eqs.push_back(residual_entry("compatibility", linear_compat(job.V, job.A)));
    json failing = json::array();
    for (const auto& e : eqs)
        if (!e["zero"].get<bool>()) failing.push_back(e["equation"]);
    emit({{"hbar", sym::to_string(hbar)}, {"equations", eqs}, {"failing", failing}, {"integral", failing.empty()}});
    return failing.empty() ? kOk : kMathFailure;
}

// ---------------------------------------------------------------------------

struct ReduceArgs {
    std::string chart, A, target, fix;
    int degree = 6;
};

int cmd_reduce(const ReduceArgs& a) {
    const Chart c = chart_arg(a.chart);
    const Coeffs10 A = io::parse_coeffs(a.A);
    const auto names = component_names(c);
    int target = -1;
    for (int i = 0; i < 2; ++i)
        if (a.target == names[static_cast<std::size_t>(i)] || a.target == std::to_string(i + 1)) target = i;
    if (target < 0) throw io::SchemaError("target must be " + names[0] + " or " + names[1]);
    const std::size_t eq = a.fix.find('=');
    if (eq == std::string::npos) throw io::SchemaError("--fix expects variable=value");
    const std::string var = a.fix.substr(0, eq);
    const std::string& other = c.vars[static_cast<std::size_t>(1 - target)];
    if (var != other) throw io::SchemaError("--fix must name the variable " + other);
    const auto spec = reduce_to_ode(c, A, target, io::parse_rational(a.fix.substr(eq + 1)));
    json out = io::to_json(spec, {});
    out["polynomial_solutions"] = nullptr;
    if (!spec.degenerate) {
        try {
            out = io::to_json(spec, polynomial_solutions(spec, a.degree));
        } catch (const NonPolynomialError&) {
            // transcendental constants from the frozen variable
        }
    }
    out["chart"] = c.name;
    out["A"] = io::to_json(A);
    emit(out);
    return spec.degenerate ? kMathFailure : kOk;
}

// ---------------------------------------------------------------------------

struct CompatArgs {
    std::string chart;
    std::optional<std::string> A;
    int random = 1;
    int points = 8;
    int trials = 6;
    std::uint64_t seed = 1;
    double tol = 1e-9;
};

std::vector<Point2> chart_points(const Chart& c, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.95, 0.95), pos(0.3, 2.0), ang(0.0, 6.283185307179586);
    std::vector<Point2> out;
    for (int i = 0; i < n; ++i) {
        switch (c.kind) {
        case ChartKind::Cartesian: out.push_back({2 * u(rng), 2 * u(rng)}); break;
        case ChartKind::Polar: out.push_back({pos(rng), ang(rng)}); break;
        case ChartKind::Parabolic: out.push_back({pos(rng), pos(rng)}); break;
        case ChartKind::Elliptic: out.push_back({u(rng), 1.0 + pos(rng)}); break;
        }
    }
    return out;
}

Coeffs10 random_coeffs(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> num(-5, 5), den(1, 4);
    Coeffs10 A;
    for (std::size_t i = 0; i < 10; ++i) A[i] = Rational(num(rng), den(rng));
    for (std::size_t i = 0; i < 10; ++i) A[i].canonicalize();
    return A;
}

int cmd_compat(const CompatArgs& a) {
    const Chart c = chart_arg(a.chart);
    std::mt19937_64 rng(a.seed);
    const CompatComparator cmp(c);
    json runs = json::array();
    double worst = 0.0;
    const int n = a.A ? 1 : a.random;
    for (int k = 0; k < n; ++k) {
        const Coeffs10 A = a.A ? io::parse_coeffs(*a.A) : random_coeffs(rng);
        const auto pts = chart_points(c, a.points, rng);
        const auto rep = compat_consistency(cmp, A, pts, a.trials, rng());
        worst = std::max(worst, rep.max_residual());
        json r = io::to_json(rep);
        r["A"] = io::to_json(A);
        runs.push_back(r);
    }
    emit({{"chart", c.name}, {"seed", a.seed}, {"runs", runs}, {"max_residual", worst}, {"tolerance", a.tol}});
    return worst <= a.tol ? kOk : kMathFailure;
}

// ---------------------------------------------------------------------------
// potentials in job files

Component component_from(const json& j, double lo, double hi) {
    if (j.is_string()) {
        try {
            return Component(sym::parse(j.get<std::string>()));
        } catch (const ParseError& e) {
            throw io::SchemaError(e.what());
        }
    }
    if (j.is_object() && j.contains("painleve1")) {
        const json& p = j.at("painleve1");
        return Component(SampledComponent(case1_component(io::require_number(p, "hbar"), io::require_number(p, "k"), lo,
                                                          hi, io::number_or(p, "w0", 0.0), io::number_or(p, "dw0", 0.0),
                                                          io::number_or(p, "tol", 1e-12))));
    }
    throw io::SchemaError("a potential component is an expression string or {\"painleve1\": {...}}");
}

SeparablePotential potential_from(const json& j, const Window& win) {
    SeparablePotential W;
    W.chart = chart_arg(j.contains("chart") ? io::require_string(j, "chart") : "cartesian");
    const bool cart = W.chart.kind == ChartKind::Cartesian;
    W.c1 = component_from(io::require(j, "c1"), win.x0, win.x1);
    W.c2 = component_from(io::require(j, "c2"), win.y0, win.y1);
    if (!cart && (!W.c1.is_symbolic() || !W.c2.is_symbolic()))
        throw io::SchemaError("special-function components are only supported in the cartesian chart");
    if (j.contains("params"))
        for (const auto& [k, v] : j.at("params").items()) W.params.set(k, io::rational_from(v));
    W.validate();
    return W;
}

Expr cartesian_potential_expr(const json& j) {
    if (j.contains("V")) return io::expr_from(j, "V");
    const SeparablePotential W = potential_from(j, Window{});
    if (!W.c1.is_symbolic() || !W.c2.is_symbolic()) throw io::SchemaError("simulate needs symbolic potentials");
    Expr V = cartesian_potential(W);
    sym::SubsMap m;
    for (const auto& name : V.free_symbols())
        if (const auto* v = W.params.find(name); v && std::holds_alternative<Rational>(*v))
            m.emplace(name, Expr(std::get<Rational>(*v)));
    return sym::subs(V, m);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string job;
    std::optional<std::string> out;
};

int cmd_simulate(const SimulateArgs& a) {
    const json job = io::read_json_file(a.job);
    const Expr V = cartesian_potential_expr(io::require(job, "potential"));
    const Expr H = free_hamiltonian() + detail::cartesian_vars(V);
    std::vector<std::string> names{"H"};
    std::vector<Expr> qs{H};
    if (job.contains("A")) {
        IntegralCandidate c;
        c.A = io::coeffs_from(job.at("A"));
        c.g1 = io::expr_from(job, "g1");
        c.g2 = io::expr_from(job, "g2");
        names.push_back("X");
        qs.push_back(build_integral(c));
    }
    if (job.contains("extra"))
        for (const auto& e : job.at("extra")) {
            names.push_back(io::require_string(e, "name"));
            qs.push_back(detail::cartesian_vars(io::expr_from(e, "expr")));
        }
    const json& init = io::require(job, "initial");
    if (!init.is_array() || init.size() != 4) throw io::SchemaError("'initial' must be [x1, x2, p1, p2]");
    PhaseState s0{init[0].get<double>(), init[1].get<double>(), init[2].get<double>(), init[3].get<double>()};
    const auto rep = trajectory_drift(H, qs, s0, io::require_number(job, "T"), io::number_or(job, "dt", 0.1),
                                      io::number_or(job, "tol", 1e-12));
    std::ofstream file;
    if (a.out) {
        file.open(*a.out);
        if (!file) throw io::SchemaError("cannot write '" + *a.out + "'");
    }
    io::write_csv(a.out ? static_cast<std::ostream&>(file) : std::cout, rep, names);
    json summary = {{"end_time", rep.end_time}, {"truncated", rep.truncated}, {"reason", rep.reason}};
    json drift = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) drift[names[i]] = rep.max_drift[i];
    summary["max_drift"] = drift;
    const double limit = io::number_or(job, "max_drift", 1e-8);
    bool ok = !rep.truncated;
    for (double d : rep.max_drift) ok = ok && d <= limit;
    summary["within_limit"] = ok;
    std::cerr << summary.dump() << '\n';
    return ok ? kOk : kMathFailure;
}

// ---------------------------------------------------------------------------

struct SpecfunArgs {
    std::string kind = "P1";
    double alpha = 0, beta = 0, z0 = 0, z1 = 1, w0 = 0, dw0 = 0, g2 = 0, g3 = 0, tol = 1e-10;
    std::size_t samples = 200;
    std::optional<std::string> job;
};

int cmd_specfun(SpecfunArgs a) {
    if (a.job) {
        const json j = io::read_json_file(*a.job);
        if (j.contains("kind")) a.kind = io::require_string(j, "kind");
        a.alpha = io::number_or(j, "alpha", a.alpha);
        a.beta = io::number_or(j, "beta", a.beta);
        a.z0 = io::number_or(j, "z0", a.z0);
        a.z1 = io::number_or(j, "z1", a.z1);
        a.w0 = io::number_or(j, "w0", a.w0);
        a.dw0 = io::number_or(j, "dw0", a.dw0);
        a.g2 = io::number_or(j, "g2", a.g2);
        a.g3 = io::number_or(j, "g3", a.g3);
        a.tol = io::number_or(j, "tol", a.tol);
        a.samples = static_cast<std::size_t>(io::number_or(j, "samples", static_cast<double>(a.samples)));
    }
    SampledSolution sol;
    if (a.kind == "WP") {
        WeierstrassSpec s{a.g2, a.g3, a.z0, a.w0, a.dw0, a.z1, a.samples, a.tol};
        const auto r = weierstrass_p(s);
        sol = r.solution;
        std::cerr << json{{"max_drift", r.max_drift}, {"max_abs_drift", r.max_abs_drift}}.dump() << '\n';
    } else {
        PainleveSpec s;
        if (a.kind != "P1" && a.kind != "P2" && a.kind != "P4") throw io::SchemaError("kind must be P1, P2, P4 or WP");
        s.kind = painleve_kind(a.kind);
        s.alpha = a.alpha;
        s.beta = a.beta;
        s.z0 = a.z0;
        s.z1 = a.z1;
        s.w0 = a.w0;
        s.dw0 = a.dw0;
        s.samples = a.samples;
        s.tol = a.tol;
        sol = integrate_painleve(s);
    }
    io::write_csv(std::cout, sol);
    if (sol.pole) std::cerr << json{{"pole", true}, {"pole_location", sol.pole_location}}.dump() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct SolvegArgs {
    std::string job;
    std::optional<std::string> csv;
};

int cmd_solveg(const SolvegArgs& a) {
    const json job = io::read_json_file(a.job);
    Window win;
    if (job.contains("window")) {
        const json& w = job.at("window");
        if (!w.is_array() || w.size() != 4) throw io::SchemaError("'window' must be [x0, x1, y0, y1]");
        win = {w[0].get<double>(), w[1].get<double>(), w[2].get<double>(), w[3].get<double>()};
    }
    const json& pj = io::require(job, "potential");
    if (pj.contains("V")) throw io::SchemaError("solveg needs a separable potential (chart, c1, c2)");
    const SeparablePotential W = potential_from(pj, win);
    const Coeffs10 A = io::coeffs_from(io::require(job, "A"));
    Point2 base{win.cx(), win.cy()};
    if (job.contains("basepoint")) base = {job.at("basepoint")[0].get<double>(), job.at("basepoint")[1].get<double>()};
    const auto res = static_cast<std::size_t>(io::number_or(job, "resolution", 101));
    GaugeFieldGrid g = solve_g_numeric(W, A, win, base, res);
    json out = {{"resolution", res},
                {"basepoint", {g.basepoint[0], g.basepoint[1]}},
                {"residual", {g.residual[0], g.residual[1], g.residual[2]}},
                {"max_residual", g.max_residual()}};
    double limit = io::number_or(job, "max_residual", 1e-6);
    bool ok = g.max_residual() <= limit;
    if (job.contains("hbar")) {
        const double hbar = io::require_number(job, "hbar");
        const auto fit = fit_killing_gauge(g, W, A, hbar);
        out["killing"] = {{"a", fit.a}, {"b", fit.b}, {"c", fit.c}};
        out["zeroth_residual"] = fit.residual;
        const double zlimit = io::number_or(job, "max_zeroth_residual", 1e-6);
        ok = ok && fit.residual <= zlimit;
    }
    out["within_limit"] = ok;
    if (a.csv) {
        std::ofstream f(*a.csv);
        if (!f) throw io::SchemaError("cannot write '" + *a.csv + "'");
        io::write_csv(f, g);
    }
    emit(out);
    return ok ? kOk : kMathFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Third-order integrals of separable 2D Hamiltonians"};
    app.require_subcommand(1);

    KernelArgs ka;
    auto* kernel = app.add_subcommand("kernel", "coefficients for which chosen leading terms vanish identically");
    kernel->add_option("--chart", ka.chart)->required();
    kernel->add_option("--select", ka.select, "e.g. F2,F3")->required();
    kernel->add_option("--method", ka.method, "symbolic or sampled");
    kernel->add_option("--points", ka.points);
    kernel->add_option("--seed", ka.seed);

    CheckArgs ca;
    auto* check = app.add_subcommand("check", "residuals of the determining equations for a candidate");
    check->add_option("--candidate", ca.candidate)->required();
    check->add_option("--hbar", ca.hbar);

    ReduceArgs ra;
    auto* reduce = app.add_subcommand("reduce", "linear ODE for one component at a fixed value of the other variable");
    reduce->add_option("--chart", ra.chart)->required();
    reduce->add_option("--A", ra.A, "e.g. A120=1,A102=1/2")->required();
    reduce->add_option("--target", ra.target)->required();
    reduce->add_option("--fix", ra.fix, "e.g. x=1")->required();
    reduce->add_option("--degree", ra.degree, "maximum degree of polynomial solutions");

    CompatArgs pa;
    auto* compat = app.add_subcommand("compat", "chart compatibility condition against the Cartesian one");
    compat->add_option("--chart", pa.chart)->required();
    compat->add_option("--A", pa.A);
    compat->add_option("--random", pa.random, "number of random coefficient sets");
    compat->add_option("--points", pa.points);
    compat->add_option("--trials", pa.trials);
    compat->add_option("--seed", pa.seed);
    compat->add_option("--tol", pa.tol);

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "drift of conserved quantities along a trajectory");
    simulate->add_option("--job", sa.job)->required();
    simulate->add_option("--out", sa.out, "CSV file (default stdout)");

    SpecfunArgs fa;
    auto* specfun = app.add_subcommand("specfun", "Painleve transcendents and the Weierstrass function");
    specfun->add_option("--kind", fa.kind, "P1, P2, P4 or WP");
    specfun->add_option("--alpha", fa.alpha);
    specfun->add_option("--beta", fa.beta);
    specfun->add_option("--z0", fa.z0);
    specfun->add_option("--z1", fa.z1);
    specfun->add_option("--w0", fa.w0);
    specfun->add_option("--dw0", fa.dw0);
    specfun->add_option("--g2", fa.g2);
    specfun->add_option("--g3", fa.g3);
    specfun->add_option("--samples", fa.samples);
    specfun->add_option("--tol", fa.tol);
    specfun->add_option("--job", fa.job);

    SolvegArgs ga;
    auto* solveg = app.add_subcommand("solveg", "numerical gauge fields g1, g2 on a window");
    solveg->add_option("--job", ga.job)->required();
    solveg->add_option("--csv", ga.csv, "write the grid to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*kernel) return cmd_kernel(ka);
        if (*check) return cmd_check(ca);
        if (*reduce) return cmd_reduce(ra);
        if (*compat) return cmd_compat(pa);
        if (*simulate) return cmd_simulate(sa);
        if (*specfun) return cmd_specfun(fa);
        if (*solveg) return cmd_solveg(ga);
    } catch (const io::SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMathFailure;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
