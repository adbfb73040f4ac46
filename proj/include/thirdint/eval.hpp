#pragma once

#include "expr.hpp"

#include <cmath>
#include <span>
#include <variant>

namespace thirdint::sym {

/// cos and sin of an angle whose values are rational (c^2 + s^2 = 1).
struct ExactAngle {
    Rational c;
    Rational s;
};

using Value = std::variant<Rational, double, ExactAngle>;

inline std::string jet_key(const std::string& function, const std::string& variable, int order) {
    return function + std::string(static_cast<std::size_t>(order), '\'') + "(" + variable + ")";
}

class Binding {
public:
    Binding() = default;
    Binding(std::initializer_list<std::pair<const std::string, Value>> init) : values_(init) {}

    Binding& set(const std::string& name, Value v) {
        values_[name] = std::move(v);
        return *this;
    }
    Binding& set_jet(const std::string& function, const std::string& variable, int order, Value v) {
        return set(jet_key(function, variable, order), std::move(v));
    }
    const Value* find(std::string_view name) const {
        auto it = values_.find(name);
        return it == values_.end() ? nullptr : &it->second;
    }
    bool contains(std::string_view name) const { return find(name) != nullptr; }
    const std::map<std::string, Value, std::less<>>& values() const { return values_; }

private:
    std::map<std::string, Value, std::less<>> values_;
};

inline double to_double(const Value& v) {
    if (auto q = std::get_if<Rational>(&v)) return q->get_d();
    if (auto d = std::get_if<double>(&v)) return *d;
    const auto& a = std::get<ExactAngle>(v);
    return std::atan2(a.s.get_d(), a.c.get_d());
}

namespace detail {

inline double float_pow(double base, const Rational& q) {
    if (is_integer(q) && q.get_num().fits_slong_p()) {
        long n = q.get_num().get_si();
        if (n == 1) return base;
        if (n == 2) return base * base;
        if (n == -1) return 1.0 / base;
        return std::pow(base, static_cast<double>(n));
    }
    if (q.get_den() == 2) {
        if (base < 0) throw EvalError("square root of a negative value");
        const double s = std::sqrt(base);
        const long n = q.get_num().get_si();
        return n == 1 ? s : std::pow(s, static_cast<double>(n));
    }
    if (base < 0) {
        if (q.get_den() % 2 == 0) throw EvalError("even root of a negative value");
        const double m = std::pow(-base, q.get_d());
        return q.get_num() % 2 == 0 ? m : -m;
    }
    return std::pow(base, q.get_d());
}

class FloatEvaluator {
public:
    explicit FloatEvaluator(const Binding& b) : b_(b) {}

    double eval(const Expr& e) {
        double sum = 0.0;
        for (const auto& t : e.terms()) {
            double p = t.coeff_d;
            for (const auto& f : t.mono) p *= float_pow(atom(*f.base), f.exp);
            sum += p;
        }
        return sum;
    }

private:
    double atom(const Atom& a) {
        auto it = cache_.find(&a);
        if (it != cache_.end()) return it->second;
        double v = 0.0;
        switch (a.kind) {
        case AtomKind::Constant: v = a.value.get_d(); break;
        case AtomKind::Symbol: v = lookup(a.name); break;
        case AtomKind::Jet: v = lookup(jet_key(a.name, a.var, a.order)); break;
        case AtomKind::Sin: v = std::sin(eval(a.arg)); break;
        case AtomKind::Cos: v = std::cos(eval(a.arg)); break;
        case AtomKind::Sum: v = eval(a.arg); break;
        }
        cache_.emplace(&a, v);
        return v;
    }
    double lookup(const std::string& name) const {
        const Value* v = b_.find(name);
        if (!v) throw SymbolError("unbound symbol '" + name + "'");
        return to_double(*v);
    }

    const Binding& b_;
    std::unordered_map<const Atom*, double> cache_;
};

inline std::pair<Rational, Rational> angle_multiple(const ExactAngle& a, long k) {
    // (c + i s)^k
    Rational c = 1, s = 0;
    Rational bc = a.c, bs = k < 0 ? Rational(-a.s) : a.s;
    unsigned long n = static_cast<unsigned long>(k < 0 ? -k : k);
    while (n) {
        if (n & 1UL) {
            Rational nc = c * bc - s * bs;
            s = c * bs + s * bc;
            c = nc;
        }
        n >>= 1;
        if (n) {
            Rational nc = bc * bc - bs * bs;
            bs = 2 * bc * bs;
            bc = nc;
        }
    }
    return {c, s};
}

class ExactEvaluator {
public:
    explicit ExactEvaluator(const Binding& b) : b_(b) {}

    Rational eval(const Expr& e) {
        Rational sum = 0;
        for (const auto& t : e.terms()) {
            Rational p = t.coeff;
            for (const auto& f : t.mono) {
                const Rational base = atom(*f.base);
                auto r = exact_pow(base, f.exp);
                if (!r) throw EvalError("irrational value in exact evaluation");
                p *= *r;
            }
            sum += p;
        }
        return sum;
    }

private:
    Rational atom(const Atom& a) {
        auto it = cache_.find(&a);
        if (it != cache_.end()) return it->second;
        Rational v;
        switch (a.kind) {
        case AtomKind::Constant: v = a.value; break;
        case AtomKind::Symbol: v = rational(a.name); break;
        case AtomKind::Jet: v = rational(jet_key(a.name, a.var, a.order)); break;
        case AtomKind::Sin:
        case AtomKind::Cos: v = trig(a); break;
        case AtomKind::Sum: v = eval(a.arg); break;
        }
        cache_.emplace(&a, v);
        return v;
    }
    Rational rational(const std::string& name) const {
        const Value* v = b_.find(name);
        if (!v) throw SymbolError("unbound symbol '" + name + "'");
        if (auto q = std::get_if<Rational>(v)) return *q;
        if (std::holds_alternative<ExactAngle>(*v)) throw EvalError("angle '" + name + "' used outside sin/cos");
        throw EvalError("exact evaluation needs a rational binding for '" + name + "'");
    }
    Rational trig(const Atom& a) {
        std::string var;
        Rational k;
        const bool is_sin = a.kind == AtomKind::Sin;
        if (linear_single_var(a.arg, &var, &k) && is_integer(k)) {
            const Value* v = b_.find(var);
            if (!v) throw SymbolError("unbound symbol '" + var + "'");
            if (auto ang = std::get_if<ExactAngle>(v)) {
                auto [c, s] = angle_multiple(*ang, k.get_num().get_si());
                return is_sin ? s : c;
            }
        }
        const Rational x = eval(a.arg);
        if (x == 0) return is_sin ? Rational(0) : Rational(1);
        throw EvalError("trigonometric value is not rational");
    }

    const Binding& b_;
    std::unordered_map<const Atom*, Rational> cache_;
};

} // namespace detail

inline double eval_float(const Expr& e, const Binding& b) { return detail::FloatEvaluator(b).eval(e); }
inline Rational eval_exact(const Expr& e, const Binding& b) { return detail::ExactEvaluator(b).eval(e); }

enum class EvalMode { Exact, Float };

/// Exact mode returns a Rational, float mode a double.
inline Value eval(const Expr& e, const Binding& b, EvalMode mode) {
    if (mode == EvalMode::Exact) return eval_exact(e, b);
    return eval_float(e, b);
}

/// An Expr flattened for repeated floating evaluation with positional inputs.
/// Every free name must be one of `slots` (symbols or jet keys) or bound in `fixed`.
class Compiled {
public:
    Compiled() = default;
    Compiled(const Expr& e, const std::vector<std::string>& slots, const Binding& fixed = {}) {
        root_ = build(e, slots, fixed);
    }

    double operator()(std::span<const double> x) const {
        std::vector<double> scratch(atoms_.size());
        return run(root_, x, scratch);
    }

private:
    struct CTerm {
        double coeff;
        std::vector<std::pair<std::size_t, Rational>> factors;
    };
    struct CAtom {
        AtomKind kind;
        int slot = -1;
        double value = 0.0;
        std::size_t sub = 0;
    };
    struct CBody {
        std::vector<CTerm> terms;
        std::vector<std::size_t> atom_order;  // atoms to compute before the terms
    };

    std::size_t build(const Expr& e, const std::vector<std::string>& slots, const Binding& fixed) {
        CBody body;
        for (const auto& t : e.terms()) {
            CTerm ct{t.coeff_d, {}};
            for (const auto& f : t.mono) {
                auto it = index_.find(f.base.get());
                std::size_t idx;
                if (it != index_.end()) {
                    idx = it->second;
                } else {
                    CAtom ca{f.base->kind};
                    const Atom& a = *f.base;
                    auto resolve = [&](const std::string& name) {
                        auto s = std::find(slots.begin(), slots.end(), name);
                        if (s != slots.end()) {
                            ca.slot = static_cast<int>(s - slots.begin());
                        } else if (const Value* v = fixed.find(name)) {
                            ca.value = to_double(*v);
                        } else {
                            throw SymbolError("unbound symbol '" + name + "'");
                        }
                    };
                    switch (a.kind) {
                    case AtomKind::Constant: ca.value = a.value.get_d(); break;
                    case AtomKind::Symbol: resolve(a.name); break;
                    case AtomKind::Jet: resolve(jet_key(a.name, a.var, a.order)); break;
                    default: ca.sub = build(a.arg, slots, fixed); break;
                    }
                    idx = atoms_.size();
                    atoms_.push_back(ca);
                    index_.emplace(f.base.get(), idx);
                    body.atom_order.push_back(idx);
                }
                ct.factors.emplace_back(idx, f.exp);
            }
            body.terms.push_back(std::move(ct));
        }
        bodies_.push_back(std::move(body));
        return bodies_.size() - 1;
    }

    double run(std::size_t bi, std::span<const double> x, std::vector<double>& val) const {
        const CBody& b = bodies_[bi];
        for (std::size_t idx : b.atom_order) {
            const CAtom& a = atoms_[idx];
            switch (a.kind) {
            case AtomKind::Constant: val[idx] = a.value; break;
            case AtomKind::Symbol:
            case AtomKind::Jet: val[idx] = a.slot >= 0 ? x[static_cast<std::size_t>(a.slot)] : a.value; break;
            case AtomKind::Sin: val[idx] = std::sin(run(a.sub, x, val)); break;
            case AtomKind::Cos: val[idx] = std::cos(run(a.sub, x, val)); break;
            case AtomKind::Sum: val[idx] = run(a.sub, x, val); break;
            }
        }
        double sum = 0.0;
        for (const auto& t : b.terms) {
            double p = t.coeff;
            for (const auto& [idx, q] : t.factors) p *= detail::float_pow(val[idx], q);
            sum += p;
        }
        return sum;
    }

    std::vector<CAtom> atoms_;
    std::vector<CBody> bodies_;
    std::unordered_map<const Atom*, std::size_t> index_;
    std::size_t root_ = 0;
};

} // namespace thirdint::sym
