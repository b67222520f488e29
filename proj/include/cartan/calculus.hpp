#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cartan/expr.hpp"
#include "cartan/printer.hpp"

namespace cartan {

// ---------------------------------------------------------------------------
// Binding: simultaneous substitution map
// ---------------------------------------------------------------------------

/// Maps atom display names to replacement expressions. Derivative
/// placeholders are addressed by their display name ("y'"); opaque
/// functions may also be bound as a whole via bind_function, in which
/// case Om(x), Om'(x), ... substitute to the bound body and its
/// derivatives evaluated at the stored argument.
class Binding {
public:
    struct FuncDef {
        std::string arg;  // formal argument symbol
        Expr body;
    };

    Binding& bind(const std::string& name, Expr value) {
        if (vars_.count(name) || funcs_.count(name))
            throw Error("Binding: symbol '" + name + "' bound twice");
        vars_.emplace(name, std::move(value));
        return *this;
    }

    Binding& bind_function(const std::string& name, std::string arg, Expr body) {
        if (vars_.count(name) || funcs_.count(name))
            throw Error("Binding: symbol '" + name + "' bound twice");
        funcs_.emplace(name, FuncDef{std::move(arg), std::move(body)});
        return *this;
    }

    const Expr* find(const std::string& name) const {
        auto it = vars_.find(name);
        return it == vars_.end() ? nullptr : &it->second;
    }

    const FuncDef* find_function(const std::string& name) const {
        auto it = funcs_.find(name);
        return it == funcs_.end() ? nullptr : &it->second;
    }

    bool empty() const { return vars_.empty() && funcs_.empty(); }

    const std::map<std::string, Expr>& vars() const { return vars_; }
    const std::map<std::string, FuncDef>& functions() const { return funcs_; }

private:
    std::map<std::string, Expr> vars_;
    std::map<std::string, FuncDef> funcs_;
};

inline std::string deriv_display_name(const std::string& name, int order) {
    std::string n = name;
    for (int i = 0; i < order; ++i) n += '\'';
    return n;
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

namespace detail {

inline Expr diff_raw(const Expr& e, const std::string& var);

inline Expr diff_factor(const Expr& base, const Rational& expo, const std::string& var) {
    // d(base^q) = q * base^(q-1) * base'
    Expr dbase = diff_raw(base, var);
    if (is_zero(dbase)) return constant(0L);
    return mul({constant(expo), pow(base, Rational(expo - 1)), dbase});
}

inline Expr diff_raw(const Expr& e, const std::string& var) {
    switch (e->kind) {
        case Kind::Constant:
            return constant(0L);
        case Kind::Symbol:
            return e->name == var ? constant(1L) : constant(0L);
        case Kind::FuncDeriv: {
            if (e->kids.empty()) return constant(0L);  // argless placeholders are independent atoms
            Expr darg = diff_raw(e->kids[0], var);
            if (is_zero(darg)) return constant(0L);
            Expr bumped = deriv_placeholder(e->name, e->deriv_order + 1, e->kids[0]);
            return mul(bumped, darg);
        }
        case Kind::Func: {
            Expr arg = e->kids[0];
            Expr darg = diff_raw(arg, var);
            if (is_zero(darg)) return constant(0L);
            switch (e->fn) {
                case Fn::Sin: return mul(cos(arg), darg);
                case Fn::Cos: return neg(mul(sin(arg), darg));
                case Fn::Exp: return mul(exp(arg), darg);
                case Fn::Ln: return div(darg, arg);
                case Fn::Sqrt: return mul({constant(Rational(1, 2)), pow(arg, Rational(-1, 2)), darg});
            }
            throw Error("differentiate: unknown function");
        }
        case Kind::Power: {
            Expr dbase = diff_raw(e->kids[0], var);
            if (is_zero(dbase)) return constant(0L);
            return mul({constant(e->expo), pow(e->kids[0], Rational(e->expo - 1)), dbase});
        }
        case Kind::Product: {
            Term t = term_view(e);
            std::vector<Expr> parts;
            for (std::size_t i = 0; i < t.factors.size(); ++i) {
                Expr dfi = diff_factor(t.factors[i].base, t.factors[i].expo, var);
                if (is_zero(dfi)) continue;
                std::vector<Expr> factors{constant(t.coeff), dfi};
                for (std::size_t j = 0; j < t.factors.size(); ++j) {
                    if (j == i) continue;
                    factors.push_back(pow(t.factors[j].base, t.factors[j].expo));
                }
                parts.push_back(mul(std::move(factors)));
            }
            return add(std::move(parts));
        }
        case Kind::Sum: {
            std::vector<Expr> parts;
            parts.reserve(e->kids.size());
            for (const auto& k : e->kids) parts.push_back(diff_raw(k, var));
            return add(std::move(parts));
        }
    }
    throw Error("differentiate: unreachable");
}

}  // namespace detail

/// Exact partial derivative; symbols other than var are independent.
inline Expr differentiate(const Expr& e, const std::string& var) {
    return detail::diff_raw(canonicalize(e), var);
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

namespace detail {

inline Expr substitute_walk(const Expr& e, const Binding& b) {
    switch (e->kind) {
        case Kind::Constant:
            return e;
        case Kind::Symbol: {
            if (const Expr* r = b.find(e->name)) return *r;
            return e;
        }
        case Kind::FuncDeriv: {
            std::string display = deriv_display_name(e->name, e->deriv_order);
            if (const Expr* r = b.find(display)) return *r;
            if (!e->kids.empty()) {
                if (const Binding::FuncDef* fd = b.find_function(e->name)) {
                    Expr body = fd->body;
                    for (int i = 0; i < e->deriv_order; ++i) body = differentiate(body, fd->arg);
                    Expr arg = substitute_walk(e->kids[0], b);
                    Binding inner;
                    inner.bind(fd->arg, arg);
                    return substitute_walk(body, inner);
                }
                Expr arg = substitute_walk(e->kids[0], b);
                return raw_deriv(e->name, e->deriv_order, arg);
            }
            return e;
        }
        case Kind::Func:
            return raw_func(e->fn, substitute_walk(e->kids[0], b));
        case Kind::Power:
            return raw_power(substitute_walk(e->kids[0], b), e->expo);
        case Kind::Product: {
            std::vector<Expr> kids;
            kids.reserve(e->kids.size());
            for (const auto& k : e->kids) kids.push_back(substitute_walk(k, b));
            return raw_product(e->value, std::move(kids));
        }
        case Kind::Sum: {
            std::vector<Expr> kids;
            kids.reserve(e->kids.size());
            for (const auto& k : e->kids) kids.push_back(substitute_walk(k, b));
            return raw_sum(std::move(kids));
        }
    }
    throw Error("substitute: unreachable");
}

}  // namespace detail

/// Simultaneous substitution followed by canonicalization.
inline Expr substitute(const Expr& e, const Binding& b) {
    if (b.empty()) return canonicalize(e);
    return canonicalize(detail::substitute_walk(canonicalize(e), b));
}

// ---------------------------------------------------------------------------
// Restricted antiderivative
// ---------------------------------------------------------------------------

class UnsupportedIntegralError : public Error {
public:
    UnsupportedIntegralError(const std::string& term)
        : Error("antiderivative: unsupported term " + term), term_text(term) {}
    std::string term_text;
};

namespace detail {

/// Split a canonical expr as m*var + rest with rest free of var; returns
/// false when the expr is not affine-linear in var.
inline bool split_linear(const Expr& e, const std::string& var, Expr& slope, Expr& rest) {
    std::vector<Expr> slope_parts, rest_parts;
    for (const auto& term : sum_terms(e)) {
        Term t = term_view(term);
        int var_pos = -1;
        for (std::size_t i = 0; i < t.factors.size(); ++i) {
            const Factor& f = t.factors[i];
            if (f.base->kind == Kind::Symbol && f.base->name == var) {
                if (f.expo != 1) return false;
                var_pos = static_cast<int>(i);
            } else if (contains_symbol(f.base, var)) {
                return false;
            }
        }
        if (var_pos >= 0) {
            Term s = t;
            s.factors.erase(s.factors.begin() + var_pos);
            slope_parts.push_back(term_build(s));
        } else {
            rest_parts.push_back(term);
        }
    }
    slope = add(std::move(slope_parts));
    rest = add(std::move(rest_parts));
    return true;
}

inline Expr antiderivative_term(const Term& t, const std::string& var);

inline Expr antiderivative_sum(const Expr& e, const std::string& var) {
    std::vector<Expr> parts;
    for (const auto& term : sum_terms(e)) parts.push_back(antiderivative_term(term_view(term), var));
    return add(std::move(parts));
}

inline Expr antiderivative_term(const Term& t, const std::string& var) {
    Rational k(0);           // power of var
    Expr osc = nullptr;      // single sin/cos/exp factor depending on var
    Rational osc_expo(1);
    std::vector<Factor> free_factors;

    for (const auto& f : t.factors) {
        if (f.base->kind == Kind::Symbol && f.base->name == var) {
            k = f.expo;
            continue;
        }
        if (!contains_symbol(f.base, var)) {
            free_factors.push_back(f);
            continue;
        }
        if (f.base->kind == Kind::Func &&
            (f.base->fn == Fn::Sin || f.base->fn == Fn::Cos || f.base->fn == Fn::Exp) && f.expo == 1 &&
            osc == nullptr) {
            osc = f.base;
            osc_expo = f.expo;
            continue;
        }
        throw UnsupportedIntegralError(to_string(term_build(t)));
    }

    Expr coeff = term_build({t.coeff, free_factors});

    if (osc == nullptr) {
        // c * var^k
        if (k == -1) return mul(coeff, ln(symbol(var)));
        Rational k1 = k + 1;
        return mul({coeff, constant(Rational(1) / k1), pow(symbol(var), k1)});
    }

    Expr slope, phase;
    if (!split_linear(osc->kids[0], var, slope, phase))
        throw UnsupportedIntegralError(to_string(term_build(t)));
    if (is_zero(slope)) throw UnsupportedIntegralError(to_string(term_build(t)));
    if (!is_integer(k) || k < 0 || k > 3) throw UnsupportedIntegralError(to_string(term_build(t)));
    long ki = to_long(k);

    Expr x = symbol(var);
    Expr inv_slope = pow(slope, Rational(-1));

    // base integral and the integration-by-parts ladder for var^k * f(m*var + b)
    // I_k = var^k * F - (k/m') * I_{k-1}-style recursion, with F the plain
    // antiderivative of the oscillating factor
    std::function<Expr(long)> integral = [&](long kk) -> Expr {
        Expr F;  // antiderivative of osc
        switch (osc->fn) {
            case Fn::Sin: F = neg(mul(inv_slope, cos(osc->kids[0]))); break;
            case Fn::Cos: F = mul(inv_slope, sin(osc->kids[0])); break;
            case Fn::Exp: F = mul(inv_slope, exp(osc->kids[0])); break;
            default: throw UnsupportedIntegralError(to_string(term_build(t)));
        }
        if (kk == 0) return F;
        // integrate by parts: int var^k osc = var^k F - k int var^(k-1) F
        // F is itself c * osc2 with osc2 in the class, so recurse termwise
        Expr tail = mul(constant(kk), F);
        Expr tail_int = antiderivative_sum(mul(pow(x, Rational(kk - 1)), tail), var);
        return sub(mul(pow(x, Rational(kk)), F), tail_int);
    };

    return mul(coeff, integral(ki));
}

}  // namespace detail

/// Exact antiderivative (zero constant) for sums of c*var^k*trig(m*var+b)
/// and c*var^k*exp(a*var), k <= 3, plus plain powers of var.
/// differentiate(antiderivative(e, v), v) == e on the supported class.
inline Expr antiderivative(const Expr& e, const std::string& var) {
    return detail::antiderivative_sum(canonicalize(e), var);
}

// ---------------------------------------------------------------------------
// Series truncation in the perturbation symbol
// ---------------------------------------------------------------------------

/// Drops monomials with eps-degree greater than order. Errors when the
/// expression is not polynomial in eps (eps under a function, a compound
/// denominator, or a fractional/negative power).
inline Expr series_truncate(const Expr& e, const std::string& eps, long order) {
    Expr c = canonicalize(e);
    std::vector<Expr> kept;
    for (const auto& term : sum_terms(c)) {
        Term t = term_view(term);
        Rational degree(0);
        for (const auto& f : t.factors) {
            if (f.base->kind == Kind::Symbol && f.base->name == eps) {
                degree = f.expo;
                if (!is_integer(degree) || degree < 0)
                    throw Error("series_truncate: not polynomial in " + eps + ": " + to_string(term));
            } else if (contains_symbol(f.base, eps)) {
                throw Error("series_truncate: " + eps + " inside non-monomial position: " + to_string(term));
            }
        }
        if (degree <= order) kept.push_back(term);
    }
    return add(std::move(kept));
}

/// Coefficient of eps^order (an exact extraction over the canonical form).
inline Expr series_coefficient(const Expr& e, const std::string& eps, long order) {
    Expr c = canonicalize(e);
    std::vector<Expr> kept;
    for (const auto& term : sum_terms(c)) {
        Term t = term_view(term);
        Rational degree(0);
        Term stripped = t;
        stripped.factors.clear();
        for (const auto& f : t.factors) {
            if (f.base->kind == Kind::Symbol && f.base->name == eps)
                degree = f.expo;
            else
                stripped.factors.push_back(f);
        }
        if (degree == order) kept.push_back(term_build(stripped));
    }
    return add(std::move(kept));
}

/// The public simplifier: canonical form (idempotent).
inline Expr simplify(const Expr& e) { return canonicalize(e); }

}  // namespace cartan
