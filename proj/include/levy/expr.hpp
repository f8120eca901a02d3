#pragma once

// Tiny arithmetic language for scalar fields given as text in config files.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' factor)?
//   base   := number | ident | func '(' expr {',' expr} ')' | '(' expr ')' | '-' base
//
// Identifiers are the coordinates x0, x1, ... and the constants pi, e.
// Functions: sin cos exp abs sqrt tanh (one argument), min max (two or more).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "levy/errors.hpp"
#include "levy/geometry.hpp"

namespace levy::expr {

enum class Func { sin, cos, exp, abs, sqrt, tanh, min, max };

inline std::optional<Func> lookup_function(std::string_view name) {
    if (name == "sin") return Func::sin;
    if (name == "cos") return Func::cos;
    if (name == "exp") return Func::exp;
    if (name == "abs") return Func::abs;
    if (name == "sqrt") return Func::sqrt;
    if (name == "tanh") return Func::tanh;
    if (name == "min") return Func::min;
    if (name == "max") return Func::max;
    return std::nullopt;
}

inline const char* function_name(Func f) {
    switch (f) {
        case Func::sin: return "sin";
        case Func::cos: return "cos";
        case Func::exp: return "exp";
        case Func::abs: return "abs";
        case Func::sqrt: return "sqrt";
        case Func::tanh: return "tanh";
        case Func::min: return "min";
        case Func::max: return "max";
    }
    return "?";
}

inline bool is_variadic(Func f) { return f == Func::min || f == Func::max; }

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { number, variable, pi, e, neg, add, sub, mul, div, pow, call };

    Kind kind = Kind::number;
    double number = 0.0;  // Kind::number
    int variable = 0;     // Kind::variable
    Func func = Func::sin;
    std::vector<NodePtr> args;  // operands or call arguments
};

inline bool structurally_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    switch (a.kind) {
        case Node::Kind::number:
            // Bitwise identity, so -0.0 and NaN payloads are distinguished.
            if (std::memcmp(&a.number, &b.number, sizeof(double)) != 0) return false;
            break;
        case Node::Kind::variable:
            if (a.variable != b.variable) return false;
            break;
        case Node::Kind::call:
            if (a.func != b.func) return false;
            break;
        default: break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!structurally_equal(*a.args[i], *b.args[i])) return false;
    return true;
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    NodePtr parse() {
        NodePtr root = parse_expr();
        skip_ws();
        if (pos_ != s_.size()) throw SyntaxError(pos_, "operator or end of input");
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip_ws();
        return pos_ < s_.size() && s_[pos_] == c;
    }
    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) throw SyntaxError(pos_, std::string("'") + c + "'");
    }

    static NodePtr binary(Node::Kind k, NodePtr l, NodePtr r) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->args = {std::move(l), std::move(r)};
        return n;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = binary(Node::Kind::add, lhs, parse_term());
            else if (accept('-')) lhs = binary(Node::Kind::sub, lhs, parse_term());
            else return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        for (;;) {
            if (accept('*')) lhs = binary(Node::Kind::mul, lhs, parse_factor());
            else if (accept('/')) lhs = binary(Node::Kind::div, lhs, parse_factor());
            else return lhs;
        }
    }

    // Right-associative: a^b^c = a^(b^c).
    NodePtr parse_factor() {
        NodePtr base = parse_base();
        if (accept('^')) return binary(Node::Kind::pow, base, parse_factor());
        return base;
    }

    NodePtr parse_base() {
        skip_ws();
        if (pos_ >= s_.size()) throw SyntaxError(pos_, "number, identifier, '(' or '-'");
        const char c = s_[pos_];
        if (c == '-') {
            ++pos_;
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::neg;
            n->args = {parse_factor()};
            return n;
        }
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw SyntaxError(pos_, "number, identifier, '(' or '-'");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_, ++n;
            return n;
        };
        std::size_t count = digits();
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            count += digits();
        }
        if (count == 0) throw SyntaxError(start, "digits");
        // An exponent is only consumed when digits follow, so "2*e" keeps e as the constant.
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < s_.size() && (s_[look] == '+' || s_[look] == '-')) ++look;
            if (look < s_.size() && std::isdigit(static_cast<unsigned char>(s_[look]))) {
                pos_ = look;
                digits();
            }
        }
        double value = 0.0;
        const auto res = std::from_chars(s_.data() + start, s_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != s_.data() + pos_ || !std::isfinite(value)) {
            throw SyntaxError(start, "finite number");
        }
        auto n = std::make_shared<Node>();
        n->kind = Node::Kind::number;
        n->number = value;
        return n;
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string_view name = s_.substr(start, pos_ - start);
        auto n = std::make_shared<Node>();
        if (peek('(')) {
            const auto f = lookup_function(name);
            if (!f) throw UnknownIdentifier("function '" + std::string(name) + "' at position " + std::to_string(start));
            expect('(');
            n->kind = Node::Kind::call;
            n->func = *f;
            n->args.push_back(parse_expr());
            while (accept(',')) n->args.push_back(parse_expr());
            expect(')');
            const std::size_t arity = n->args.size();
            if (is_variadic(*f) ? arity < 2 : arity != 1) {
                throw ArityError(std::string(function_name(*f)) + " called with " + std::to_string(arity) +
                                 " argument(s) at position " + std::to_string(start));
            }
            return n;
        }
        if (name == "pi") {
            n->kind = Node::Kind::pi;
            return n;
        }
        if (name == "e") {
            n->kind = Node::Kind::e;
            return n;
        }
        if (name.size() >= 2 && name[0] == 'x') {
            int index = 0;
            const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), index);
            if (res.ec == std::errc() && res.ptr == name.data() + name.size() && index >= 0) {
                n->kind = Node::Kind::variable;
                n->variable = index;
                return n;
            }
        }
        if (lookup_function(name)) throw SyntaxError(pos_, "'(' after function name");
        throw UnknownIdentifier("'" + std::string(name) + "' at position " + std::to_string(start));
    }
};

inline void print_node(const Node& n, std::string& out) {
    switch (n.kind) {
        case Node::Kind::number: {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof(buf), n.number);
            out.append(buf, res.ptr);
            return;
        }
        case Node::Kind::variable: out += "x" + std::to_string(n.variable); return;
        case Node::Kind::pi: out += "pi"; return;
        case Node::Kind::e: out += "e"; return;
        case Node::Kind::neg:
            out += "(-";
            print_node(*n.args[0], out);
            out += ")";
            return;
        case Node::Kind::call:
            out += function_name(n.func);
            out += "(";
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                print_node(*n.args[i], out);
            }
            out += ")";
            return;
        default: break;
    }
    const char* op = n.kind == Node::Kind::add   ? " + "
                     : n.kind == Node::Kind::sub ? " - "
                     : n.kind == Node::Kind::mul ? " * "
                     : n.kind == Node::Kind::div ? " / "
                                                 : " ^ ";
    out += "(";
    print_node(*n.args[0], out);
    out += op;
    print_node(*n.args[1], out);
    out += ")";
}

inline double eval_node(const Node& n, std::span<const double> x) {
    switch (n.kind) {
        case Node::Kind::number: return n.number;
        case Node::Kind::variable:
            if (static_cast<std::size_t>(n.variable) >= x.size()) {
                throw UnboundVariable("x" + std::to_string(n.variable) + " with dimension " + std::to_string(x.size()));
            }
            return x[n.variable];
        case Node::Kind::pi: return M_PI;
        case Node::Kind::e: return M_E;
        case Node::Kind::neg: return -eval_node(*n.args[0], x);
        case Node::Kind::add: return eval_node(*n.args[0], x) + eval_node(*n.args[1], x);
        case Node::Kind::sub: return eval_node(*n.args[0], x) - eval_node(*n.args[1], x);
        case Node::Kind::mul: return eval_node(*n.args[0], x) * eval_node(*n.args[1], x);
        case Node::Kind::div: {
            const double num = eval_node(*n.args[0], x);
            const double den = eval_node(*n.args[1], x);
            if (den == 0.0) throw DomainError("division by zero");
            return num / den;
        }
        case Node::Kind::pow: {
            const double b = eval_node(*n.args[0], x);
            const double p = eval_node(*n.args[1], x);
            const double r = std::pow(b, p);
            if (!std::isfinite(r)) throw DomainError("pow(" + std::to_string(b) + ", " + std::to_string(p) + ")");
            return r;
        }
        case Node::Kind::call: {
            const double a = eval_node(*n.args[0], x);
            switch (n.func) {
                case Func::sin: return std::sin(a);
                case Func::cos: return std::cos(a);
                case Func::exp: {
                    const double r = std::exp(a);
                    if (!std::isfinite(r)) throw DomainError("exp overflow");
                    return r;
                }
                case Func::abs: return std::abs(a);
                case Func::sqrt:
                    if (a < 0.0) throw DomainError("sqrt of negative argument");
                    return std::sqrt(a);
                case Func::tanh: return std::tanh(a);
                case Func::min:
                case Func::max: {
                    double acc = a;
                    for (std::size_t i = 1; i < n.args.size(); ++i) {
                        const double v = eval_node(*n.args[i], x);
                        acc = n.func == Func::min ? std::min(acc, v) : std::max(acc, v);
                    }
                    return acc;
                }
            }
        }
    }
    return 0.0;
}

inline int max_variable(const Node& n) {
    int m = n.kind == Node::Kind::variable ? n.variable : -1;
    for (const auto& a : n.args) m = std::max(m, max_variable(*a));
    return m;
}

}  // namespace detail

/// Immutable parsed expression.
class Expr {
public:
    static Expr parse(std::string_view text) { return Expr(detail::Parser(text).parse()); }

    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    [[nodiscard]] double evaluate(std::span<const double> x) const { return detail::eval_node(*root_, x); }
    [[nodiscard]] double evaluate(const Point& x) const { return evaluate(x.span()); }

    /// Fully parenthesized canonical text; parse(print()) reproduces the tree.
    [[nodiscard]] std::string print() const {
        std::string out;
        detail::print_node(*root_, out);
        return out;
    }

    /// Highest coordinate index referenced, or -1 for constant expressions.
    [[nodiscard]] int max_variable() const { return detail::max_variable(*root_); }

    [[nodiscard]] const Node& root() const { return *root_; }

    friend bool structurally_equal(const Expr& a, const Expr& b) { return structurally_equal(*a.root_, *b.root_); }

private:
    NodePtr root_;
};

}  // namespace levy::expr

namespace levy {

/// A real-valued field on R^N: either an expression bound to a dimension or
/// an arbitrary callable. Constant fields short-circuit evaluation.
class ScalarField {
public:
    ScalarField() : constant_(0.0), text_("0") {}

    static ScalarField constant(double value) {
        ScalarField f;
        f.constant_ = value;
        f.text_ = std::to_string(value);
        return f;
    }

    static ScalarField from_expression(std::string_view text, int dim) {
        const expr::Expr e = expr::Expr::parse(text);
        if (e.max_variable() >= dim) {
            throw UnboundVariable("x" + std::to_string(e.max_variable()) + " in '" + std::string(text) +
                                  "' with dimension " + std::to_string(dim));
        }
        ScalarField f;
        f.text_ = std::string(text);
        if (e.max_variable() < 0) {
            f.constant_ = e.evaluate(std::span<const double>{});
        } else {
            f.constant_.reset();
            f.fn_ = [e](const Point& x) { return e.evaluate(x); };
        }
        return f;
    }

    static ScalarField from_function(std::function<double(const Point&)> fn, std::string description) {
        ScalarField f;
        f.constant_.reset();
        f.fn_ = std::move(fn);
        f.text_ = std::move(description);
        return f;
    }

    double operator()(const Point& x) const { return constant_ ? *constant_ : fn_(x); }

    [[nodiscard]] bool is_constant() const { return constant_.has_value(); }
    [[nodiscard]] const std::string& text() const { return text_; }

private:
    std::function<double(const Point&)> fn_;
    std::optional<double> constant_;
    std::string text_;
};

}  // namespace levy
