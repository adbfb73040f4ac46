#pragma once

#include "eval.hpp"
#include "expr.hpp"

#include <cctype>

namespace thirdint::sym {

/// Unnormalized syntax tree, as read from text.
struct RawNode;
using Raw = std::shared_ptr<const RawNode>;

struct RawNode {
    enum class Kind { Num, Sym, Jet, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Sqrt };
    Kind kind;
    Rational value;
    std::string name;
    std::string var;
    int order = 0;
    Raw a;
    Raw b;
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Raw parse() {
        Raw r = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return r;
    }

private:
    static Raw node(RawNode n) { return std::make_shared<const RawNode>(std::move(n)); }
    static Raw binary(RawNode::Kind k, Raw a, Raw b) {
        RawNode n{k};
        n.a = std::move(a);
        n.b = std::move(b);
        return node(std::move(n));
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at position " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }

    Raw expr() {
        Raw lhs = term();
        for (;;) {
            if (eat('+'))
                lhs = binary(RawNode::Kind::Add, lhs, term());
            else if (eat('-'))
                lhs = binary(RawNode::Kind::Sub, lhs, term());
            else
                return lhs;
        }
    }
    Raw term() {
        Raw lhs = unary();
        for (;;) {
            if (eat('*'))
                lhs = binary(RawNode::Kind::Mul, lhs, unary());
            else if (eat('/'))
                lhs = binary(RawNode::Kind::Div, lhs, unary());
            else
                return lhs;
        }
    }
    Raw unary() {
        if (eat('-')) {
            RawNode n{RawNode::Kind::Neg};
            n.a = unary();
            return node(std::move(n));
        }
        if (eat('+')) return unary();
        return power();
    }
    Raw power() {
        Raw base = primary();
        if (eat('^')) return binary(RawNode::Kind::Pow, base, unary());
        return base;
    }
    Raw primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Raw r = expr();
            expect(')');
            return r;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        fail("unexpected '" + std::string(1, c) + "'");
    }
    Raw number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        std::string digits(s_.substr(start, pos_ - start));
        std::string frac;
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            const std::size_t fs = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            frac = std::string(s_.substr(fs, pos_ - fs));
        }
        if (digits.empty() && frac.empty()) fail("malformed number");
        mpz_class num(digits.empty() ? "0" : digits, 10);
        mpz_class den = 1;
        if (!frac.empty()) {
            mpz_ui_pow_ui(den.get_mpz_t(), 10, frac.size());
            num = num * den + mpz_class(frac, 10);
        }
        RawNode n{RawNode::Kind::Num};
        n.value = Rational(num, den);
        n.value.canonicalize();
        return node(std::move(n));
    }
    Raw name() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        std::string id(s_.substr(start, pos_ - start));
        int primes = 0;
        while (pos_ < s_.size() && s_[pos_] == '\'') {
            ++primes;
            ++pos_;
        }
        skip();
        const bool call = pos_ < s_.size() && s_[pos_] == '(';
        if (!call) {
            if (primes) fail("derivative marks without an argument");
            RawNode n{RawNode::Kind::Sym};
            n.name = id;
            return node(std::move(n));
        }
        ++pos_;
        if (primes == 0 && (id == "sin" || id == "cos" || id == "sqrt")) {
            RawNode n{id == "sin" ? RawNode::Kind::Sin : id == "cos" ? RawNode::Kind::Cos : RawNode::Kind::Sqrt};
            n.a = expr();
            expect(')');
            return node(std::move(n));
        }
        skip();
        const std::size_t vs = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        std::string var(s_.substr(vs, pos_ - vs));
        if (!is_variable_name(var)) fail("function argument must be a variable, got '" + var + "'");
        expect(')');
        RawNode n{RawNode::Kind::Jet};
        n.name = id;
        n.var = var;
        n.order = primes;
        return node(std::move(n));
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Raw parse_raw(std::string_view text) { return detail::Parser(text).parse(); }

inline Expr normalize(const Raw& r) {
    using K = RawNode::Kind;
    switch (r->kind) {
    case K::Num: return Expr(r->value);
    case K::Sym: return Expr::symbol(r->name);
    case K::Jet: return Expr::jet(r->name, r->var, r->order);
    case K::Add: return normalize(r->a) + normalize(r->b);
    case K::Sub: return normalize(r->a) - normalize(r->b);
    case K::Mul: return normalize(r->a) * normalize(r->b);
    case K::Div: return normalize(r->a) / normalize(r->b);
    case K::Neg: return -normalize(r->a);
    case K::Pow: {
        auto q = normalize(r->b).constant_value();
        if (!q) throw ParseError("exponent must be a rational constant");
        return pow(normalize(r->a), *q);
    }
    case K::Sin: return sin(normalize(r->a));
    case K::Cos: return cos(normalize(r->a));
    case K::Sqrt: return sqrt(normalize(r->a));
    }
    return Expr();
}

inline Expr parse(std::string_view text) { return normalize(parse_raw(text)); }

/// Direct floating evaluation of the syntax tree, without normalization.
inline double eval_raw(const Raw& r, const Binding& b) {
    using K = RawNode::Kind;
    auto lookup = [&](const std::string& key) {
        const Value* v = b.find(key);
        if (!v) throw SymbolError("unbound symbol '" + key + "'");
        return to_double(*v);
    };
    switch (r->kind) {
    case K::Num: return r->value.get_d();
    case K::Sym: return lookup(r->name);
    case K::Jet: return lookup(jet_key(r->name, r->var, r->order));
    case K::Add: return eval_raw(r->a, b) + eval_raw(r->b, b);
    case K::Sub: return eval_raw(r->a, b) - eval_raw(r->b, b);
    case K::Mul: return eval_raw(r->a, b) * eval_raw(r->b, b);
    case K::Div: return eval_raw(r->a, b) / eval_raw(r->b, b);
    case K::Neg: return -eval_raw(r->a, b);
    case K::Pow: return std::pow(eval_raw(r->a, b), eval_raw(r->b, b));
    case K::Sin: return std::sin(eval_raw(r->a, b));
    case K::Cos: return std::cos(eval_raw(r->a, b));
    case K::Sqrt: return std::sqrt(eval_raw(r->a, b));
    }
    return 0.0;
}

inline std::string to_string(const Raw& r) {
    using K = RawNode::Kind;
    switch (r->kind) {
    case K::Num: return is_integer(r->value) ? r->value.get_str() : "(" + r->value.get_str() + ")";
    case K::Sym: return r->name;
    case K::Jet: return jet_key(r->name, r->var, r->order);
    case K::Add: return "(" + to_string(r->a) + " + " + to_string(r->b) + ")";
    case K::Sub: return "(" + to_string(r->a) + " - " + to_string(r->b) + ")";
    case K::Mul: return "(" + to_string(r->a) + "*" + to_string(r->b) + ")";
    case K::Div: return "(" + to_string(r->a) + "/" + to_string(r->b) + ")";
    case K::Neg: return "(-" + to_string(r->a) + ")";
    case K::Pow: return "(" + to_string(r->a) + ")^(" + to_string(r->b) + ")";
    case K::Sin: return "sin(" + to_string(r->a) + ")";
    case K::Cos: return "cos(" + to_string(r->a) + ")";
    case K::Sqrt: return "sqrt(" + to_string(r->a) + ")";
    }
    return "";
}

} // namespace thirdint::sym
