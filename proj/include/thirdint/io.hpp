#pragma once

#include "determine.hpp"
#include "dynamics.hpp"
#include "specfun.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <ostream>

namespace thirdint::io {

using nlohmann::json;

/// Input that does not match the expected job layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

inline std::string rational_text(const Rational& q) { return q.get_str(); }

inline Rational parse_rational(const std::string& s) {
    const auto e = sym::parse(s);
    auto v = e.constant_value();
    if (!v) throw SchemaError("not a rational number: '" + s + "'");
    return *v;
}

inline Rational rational_from(const json& j) {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<long>());
    if (j.is_number()) return parse_rational(std::to_string(j.get<double>()));
    throw SchemaError("expected a rational as string or number");
}

/// Coefficients from "A120=1,A102=1/2".
inline Coeffs10 parse_coeffs(std::string_view text) {
    Coeffs10 A;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view item = text.substr(pos, end - pos);
        const std::size_t eq = item.find('=');
        if (eq == std::string_view::npos) throw SchemaError("coefficient assignment needs '=': '" + std::string(item) + "'");
        std::string name(item.substr(0, eq));
        name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
        try {
            A[name] = parse_rational(std::string(item.substr(eq + 1)));
        } catch (const SymbolError& e) {
            throw SchemaError(e.what());
        }
        pos = end + 1;
    }
    return A;
}

inline Coeffs10 coeffs_from(const json& j) {
    if (j.is_string()) return parse_coeffs(j.get<std::string>());
    if (!j.is_object()) throw SchemaError("coefficients must be an object of name -> rational");
    Coeffs10 A;
    for (const auto& [k, v] : j.items()) {
        try {
            A[k] = rational_from(v);
        } catch (const SymbolError& e) {
            throw SchemaError(e.what());
        }
    }
    return A;
}

inline json to_json(const Coeffs10& A) {
    json j = json::object();
    for (std::size_t i = 0; i < 10; ++i) j[kCoeffNames[i]] = rational_text(A[i]);
    return j;
}

inline json to_json(const KernelReport& r) {
    json basis = json::array();
    for (const auto& v : r.basis) {
        json row = json::array();
        for (const auto& q : v) row.push_back(rational_text(q));
        basis.push_back(row);
    }
    json names = json::array();
    for (const char* n : kCoeffNames) names.push_back(n);
    return {{"chart", r.chart.name}, {"selected", r.selected}, {"method", r.method},
            {"dimension", r.dimension}, {"coefficients", names}, {"basis", basis}};
}

inline json to_json(const LinearOdeSpec& s, const std::vector<Expr>& solutions) {
    json c = json::object();
    for (int k = 0; k <= 3; ++k) c["c" + std::to_string(k)] = sym::to_string(s.c[static_cast<std::size_t>(k)]);
    json inh = json::array();
    for (const auto& [name, e] : s.inhomogeneity) inh.push_back({{"constant", name}, {"factor", sym::to_string(e)}});
    json sols = json::array();
    for (const auto& e : solutions) sols.push_back(sym::to_string(e));
    return {{"variable", s.variable},
            {"function", s.function},
            {"coefficients", c},
            {"inhomogeneity", inh},
            {"fixed", {{"variable", s.fixed_variable}, {"value", rational_text(s.fixed_value)}}},
            {"degenerate", s.degenerate},
            {"polynomial_solutions", sols}};
}

inline json to_json(const ConsistencyReport& r) {
    json pts = json::array();
    for (const auto& p : r.points)
        pts.push_back({{"point", {p.q[0], p.q[1]}},
                       {"multiplier", p.multiplier},
                       {"residual", p.residual},
                       {"degenerate", p.degenerate}});
    return {{"points", pts}, {"max_residual", r.max_residual()}, {"all_degenerate", r.all_degenerate()}};
}

/// %.17g formatting for CSV output.
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const SampledSolution& s) {
    os << "z,w,dw,err,pole_flag\n";
    for (std::size_t i = 0; i < s.z.size(); ++i)
        os << num(s.z[i]) << ',' << num(s.w[i]) << ',' << num(s.dw[i]) << ',' << num(s.err[i]) << ','
           << (s.pole_flag[i] ? 1 : 0) << '\n';
}

inline void write_csv(std::ostream& os, const DriftReport& d, const std::vector<std::string>& names) {
    os << "t";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        os << num(d.t[i]);
        for (const auto& v : d.values) os << ',' << num(v[i]);
        os << '\n';
    }
}

inline void write_csv(std::ostream& os, const GaugeFieldGrid& g) {
    os << "x,y,g1,g2\n";
    for (std::size_t j = 0; j < g.y.size(); ++j)
        for (std::size_t i = 0; i < g.x.size(); ++i)
            os << num(g.x[i]) << ',' << num(g.y[j]) << ',' << num(g.g1[j][i]) << ',' << num(g.g2[j][i]) << '\n';
}

// ---------------------------------------------------------------------------
// job files

inline const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
    return j.at(key);
}

inline std::string require_string(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

inline double require_number(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

inline double number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw SchemaError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline Expr expr_from(const json& j, const char* key) {
    try {
        return sym::parse(require_string(j, key));
    } catch (const ParseError& e) {
        throw SchemaError(std::string("field '") + key + "': " + e.what());
    }
}

/// Candidate file: {"A": {...}, "V": "...", "g1": "...", "g2": "...", "hbar": "0"}.
struct CandidateJob {
    Coeffs10 A;
    Expr V, g1, g2;
    Expr hbar;
};

inline CandidateJob candidate_from(const json& j) {
    CandidateJob c;
    c.A = coeffs_from(require(j, "A"));
    c.V = expr_from(j, "V");
    c.g1 = expr_from(j, "g1");
    c.g2 = expr_from(j, "g2");
    c.hbar = j.contains("hbar") ? Expr(rational_from(j.at("hbar"))) : Expr();
    return c;
}

inline json read_json_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw SchemaError("cannot open '" + path + "'");
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
    }
}

} // namespace thirdint::io
