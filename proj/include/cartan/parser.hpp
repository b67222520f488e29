#pragma once

#include <cctype>
#include <string>

#include "cartan/expr.hpp"
#include "cartan/printer.hpp"

namespace cartan {

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t pos)
        : Error(what + " at position " + std::to_string(pos)), position(pos) {}
    std::size_t position;
};

/// Recursive-descent parser for the infix grammar documented in
/// docs/grammar.md. Returns raw trees; parse() canonicalizes.
///
/// Notes:
///  - `i` is the imaginary unit.
///  - Exponents must be rational constants: x^2, x^(-1), x^(1/2).
///  - Primes build derivative placeholders: y' is an atom, Om'(x) the
///    first derivative of the opaque function Om at x.
///  - An identifier other than sin/cos/exp/ln/sqrt applied to a single
///    symbol is an opaque function; applied to anything else it is an
///    unknown function error.
class Parser {
public:
    explicit Parser(std::string text) : text_(std::move(text)) {}

    Expr parse_raw() {
        Expr e = parse_sum();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    std::string text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Expr parse_sum() {
        std::vector<Expr> parts;
        bool lead_minus = eat('-');
        Expr first = parse_product();
        parts.push_back(lead_minus ? raw_product(RatC(Rational(-1)), {first}) : first);
        while (true) {
            if (eat('+')) parts.push_back(parse_product());
            else if (eat('-')) parts.push_back(raw_product(RatC(Rational(-1)), {parse_product()}));
            else break;
        }
        if (parts.size() == 1) return parts[0];
        return raw_sum(std::move(parts));
    }

    Expr parse_product() {
        Expr acc = parse_power();
        while (true) {
            if (eat('*')) {
                acc = raw_product(RatC(1), {acc, parse_power()});
            } else if (eat('/')) {
                acc = raw_product(RatC(1), {acc, raw_power(parse_power(), Rational(-1))});
            } else {
                break;
            }
        }
        return acc;
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (eat('^')) {
            Rational q = parse_exponent();
            return raw_power(base, q);
        }
        return base;
    }

    Rational parse_exponent() {
        skip_ws();
        std::size_t at = pos_;
        if (eat('(')) {
            Expr e = parse_sum();
            if (!eat(')')) throw ParseError("expected ')' in exponent", pos_);
            Expr c = canonicalize(e);
            if (c->kind != Kind::Constant || !c->value.is_real())
                throw ParseError("exponent must be a rational constant", at);
            return c->value.re;
        }
        bool negative = eat('-');
        Rational q = parse_number();  // bare exponents are integers/decimals; use parens for 1/2
        return negative ? Rational(-q) : q;
    }

    Rational parse_number() {
        skip_ws();
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            throw ParseError("expected number", pos_);
        std::string digits;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            digits += text_[pos_++];
        Rational value{BigInt(digits)};
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            std::string frac;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                frac += text_[pos_++];
            if (frac.empty()) throw ParseError("expected digits after decimal point", pos_);
            BigInt den = 1;
            for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
            value += Rational(BigInt(frac), den);
        }
        return value;
    }

    Expr parse_primary() {
        skip_ws();
        std::size_t at = pos_;
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            Rational q = parse_number();
            return raw_constant(RatC(q));
        }
        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                name += text_[pos_++];
            int primes = 0;
            while (pos_ < text_.size() && text_[pos_] == '\'') {
                ++primes;
                ++pos_;
            }
            bool call = pos_ < text_.size() && text_[pos_] == '(';
            if (call) {
                ++pos_;
                Expr arg = parse_sum();
                if (!eat(')')) throw ParseError("expected ')' after function argument", pos_);
                if (primes == 0) {
                    if (name == "sin") return raw_func(Fn::Sin, arg);
                    if (name == "cos") return raw_func(Fn::Cos, arg);
                    if (name == "exp") return raw_func(Fn::Exp, arg);
                    if (name == "ln") return raw_func(Fn::Ln, arg);
                    if (name == "sqrt") return raw_func(Fn::Sqrt, arg);
                }
                // opaque function placeholder: argument must be a single symbol
                if (arg->kind != Kind::Symbol)
                    throw ParseError("unknown function '" + name + "'", at);
                return raw_deriv(name, primes, arg);
            }
            if (primes > 0) return raw_deriv(name, primes);
            if (name == "i") return raw_constant(RatC(Rational(0), Rational(1)));
            return raw_symbol(name);
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }
};

inline Expr parse_raw(const std::string& text) { return Parser(text).parse_raw(); }

/// Parse and canonicalize. parse(to_string(e)) == e for canonical e.
inline Expr parse(const std::string& text) { return canonicalize(parse_raw(text)); }

}  // namespace cartan
