#pragma once

#include "errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace thirdint {

using State = std::vector<double>;
using OdeSystem = std::function<void(const State& x, State& dxdt, double t)>;

struct OdeOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double initial_step = 1e-3;
    double blowup = 1e6;          // |x_i| above this on a watched component is a pole
    double min_step = 1e-12;      // relative to max(1, |t|); smaller accepted steps mean collapse
    std::vector<std::size_t> watch;  // components checked for blow-up; empty means all
    std::function<void(const State&, double)> guard;  // may throw before each step
};

enum class OdeStop { Completed, Blowup, StepCollapse };

/// Accepted steps of an adaptive Dormand-Prince 5(4) integration, stepped onto a grid.
struct OdeRun {
    std::vector<double> t;
    std::vector<State> x;
    std::vector<double> err;  // local error estimate of the step that produced each sample
    std::vector<bool> near_pole;
    OdeStop stop = OdeStop::Completed;
    double stop_time = 0.0;
    std::size_t steps = 0;
};

namespace detail {

inline double max_abs(const State& x, const std::vector<std::size_t>& watch) {
    double m = 0.0;
    if (watch.empty()) {
        for (double v : x) m = std::max(m, std::fabs(v));
    } else {
        for (std::size_t i : watch) m = std::max(m, std::fabs(x[i]));
    }
    return m;
}

inline double error_norm(const State& xerr, const State& x, const OdeOptions& o) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        m = std::max(m, std::fabs(xerr[i]) / (o.abs_tol + o.rel_tol * std::fabs(x[i])));
    return m * std::min(o.abs_tol, o.rel_tol);
}

} // namespace detail

/// Integrates from t0 to t1 (either direction), landing a step on each point of `grid`
/// (monotone in the direction of integration, inside [t0, t1]). An empty grid records
/// every accepted step instead.
inline OdeRun integrate_ode(const OdeSystem& f, State x0, double t0, double t1, const std::vector<double>& grid,
                            const OdeOptions& o = {}) {
    namespace ode = boost::numeric::odeint;
    using Stepper = ode::runge_kutta_dopri5<State>;
    if (!(o.abs_tol > 0) || !(o.rel_tol > 0)) throw PreconditionError("tolerances must be positive");
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    auto system = [&f](const State& x, State& dxdt, double t) { f(x, dxdt, t); };
    auto dense = ode::make_dense_output(o.abs_tol, o.rel_tol, Stepper());
    Stepper check;
    dense.initialize(x0, t0, dir * std::min(o.initial_step, std::fabs(t1 - t0) > 0 ? std::fabs(t1 - t0) : 1.0));

    OdeRun run;
    auto record = [&](double t, const State& x, double err) {
        run.t.push_back(t);
        run.x.push_back(x);
        run.err.push_back(err);
        run.near_pole.push_back(false);
    };
    std::size_t next = 0;
    if (grid.empty()) {
        record(t0, x0, 0.0);
    } else {
        while (next < grid.size() && dir * (grid[next] - t0) <= 0) record(grid[next++], x0, 0.0);
    }
    if (t1 == t0) return run;

    State buf(x0.size()), xerr(x0.size()), dxdt(x0.size()), dxdt_out(x0.size());
    while (dir * (dense.current_time() - t1) < 0) {
        if (o.guard) o.guard(dense.current_state(), dense.current_time());
        // land on the next grid point: samples are step endpoints, not interpolants
        const double target = next < grid.size() ? grid[next] : t1;
        const double remaining = target - dense.current_time();
        if (dir * (dense.current_time_step() - remaining * (1 - 1e-6)) > 0) {
            const State here = dense.current_state();
            dense.initialize(here, dense.current_time(), remaining);
        }
        std::pair<double, double> span;
        try {
            span = dense.do_step(system);
        } catch (const ode::step_adjustment_error&) {
            run.stop = OdeStop::StepCollapse;
            run.stop_time = dense.current_time();
            break;
        }
        ++run.steps;
        const double ta = span.first, tb = span.second;
        // local error estimate of the accepted step
        const State& xa = dense.previous_state();
        system(xa, dxdt, ta);
        check.do_step(system, xa, dxdt, ta, buf, dxdt_out, tb - ta, xerr);
        const double err = detail::error_norm(xerr, buf, o);
        if (grid.empty()) {
            record(tb, dense.current_state(), err);
        } else {
            const double slack = 8 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(tb));
            while (next < grid.size() && dir * (grid[next] - tb) <= slack) {
                if (std::fabs(grid[next] - tb) <= slack) {
                    record(grid[next++], dense.current_state(), err);
                } else {
                    dense.calc_state(grid[next], buf);
                    record(grid[next++], buf, err);
                }
            }
        }
        const bool blew_up = detail::max_abs(dense.current_state(), o.watch) > o.blowup;
        const bool collapsed = std::fabs(tb - ta) < o.min_step * std::max(1.0, std::fabs(tb)) &&
                               dir * (tb - t1) < 0;
        if (blew_up || collapsed || !std::isfinite(detail::max_abs(dense.current_state(), {}))) {
            run.stop = blew_up ? OdeStop::Blowup : OdeStop::StepCollapse;
            run.stop_time = tb;
            // samples taken inside the final step sit next to the singularity
            for (std::size_t i = run.t.size(); i-- > 0 && dir * (run.t[i] - ta) > 0;) run.near_pole[i] = true;
            break;
        }
    }
    if (run.stop == OdeStop::Completed) run.stop_time = t1;
    return run;
}

/// n + 1 equally spaced points from a to b inclusive.
inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
    out[n] = b;
    return out;
}

} // namespace thirdint
