#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <string>

#include "cartan/calculus.hpp"
#include "cartan/expr.hpp"
#include "cartan/printer.hpp"

namespace cartan {

class EvalError : public Error {
public:
    EvalError(const std::string& what, const Expr& where)
        : Error(what + " in " + to_string(where)), offending(where) {}
    Expr offending;
};

/// Point for numeric evaluation: atom display name -> value.
using NumericBinding = std::map<std::string, std::complex<double>>;

namespace detail {

inline std::complex<double> eval_walk(const Expr& e, const NumericBinding& env) {
    switch (e->kind) {
        case Kind::Constant:
            return e->value.to_complex();
        case Kind::Symbol: {
            auto it = env.find(e->name);
            if (it == env.end()) throw EvalError("unbound symbol '" + e->name + "'", e);
            return it->second;
        }
        case Kind::FuncDeriv: {
            auto it = env.find(deriv_display_name(e->name, e->deriv_order));
            if (it == env.end())
                throw EvalError("unbound placeholder '" + deriv_display_name(e->name, e->deriv_order) + "'", e);
            return it->second;
        }
        case Kind::Func: {
            std::complex<double> a = eval_walk(e->kids[0], env);
            switch (e->fn) {
                case Fn::Sin: return std::sin(a);
                case Fn::Cos: return std::cos(a);
                case Fn::Exp: return std::exp(a);
                case Fn::Ln:
                    // real branch only: argument must be a positive real
                    if (std::abs(a.imag()) > 1e-12 * (1.0 + std::abs(a.real())) || a.real() <= 0.0)
                        throw EvalError("ln of non-positive-real argument", e);
                    return std::log(a.real());
                case Fn::Sqrt: return std::sqrt(a);
            }
            throw EvalError("unknown function", e);
        }
        case Kind::Power: {
            std::complex<double> b = eval_walk(e->kids[0], env);
            double q = to_double(e->expo);
            if (std::abs(b) == 0.0) {
                if (e->expo < 0) throw EvalError("pole: zero base with negative exponent", e);
                return {0.0, 0.0};
            }
            if (is_integer(e->expo)) {
                long n = to_long(e->expo);
                std::complex<double> acc{1.0, 0.0}, base = b;
                unsigned long m = n < 0 ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
                while (m) {
                    if (m & 1) acc *= base;
                    base *= base;
                    m >>= 1;
                }
                return n < 0 ? 1.0 / acc : acc;
            }
            if (std::abs(b.imag()) < 1e-14 * (1.0 + std::abs(b.real())) && b.real() > 0.0)
                return std::pow(b.real(), q);
            return std::pow(b, std::complex<double>(q, 0.0));  // principal branch
        }
        case Kind::Product: {
            std::complex<double> acc = e->value.to_complex();
            for (const auto& k : e->kids) acc *= eval_walk(k, env);
            return acc;
        }
        case Kind::Sum: {
            std::complex<double> acc{0.0, 0.0};
            for (const auto& k : e->kids) acc += eval_walk(k, env);
            return acc;
        }
    }
    throw EvalError("unreachable", e);
}

}  // namespace detail

/// IEEE double evaluation; the complex channel carries oscillatory phases.
/// Every free atom must be bound; ln restricts to positive real arguments.
inline std::complex<double> eval_numeric(const Expr& e, const NumericBinding& env) {
    return detail::eval_walk(e, env);
}

inline double eval_real(const Expr& e, const NumericBinding& env) {
    std::complex<double> v = eval_numeric(e, env);
    if (std::abs(v.imag()) > 1e-9 * (1.0 + std::abs(v.real())))
        throw EvalError("expected real value, got imaginary part " + std::to_string(v.imag()), e);
    return v.real();
}

// ---------------------------------------------------------------------------
// Equivalence: canonical equality with a sampled numeric fallback
// ---------------------------------------------------------------------------

struct Equivalence {
    bool equal = false;
    bool probabilistic = false;  // true when decided by numeric sampling
    explicit operator bool() const { return equal; }
};

/// Sampling interval for the numeric fallback; [0.25, 1.75] stays clear of
/// the singular loci of the built-in problem classes (y+z = 0, u = 0,
/// non-positive ln arguments with positive-coefficient affine arguments).
inline constexpr double kEquivalenceLo = 0.25;
inline constexpr double kEquivalenceHi = 1.75;

inline Equivalence equivalent(const Expr& a, const Expr& b) {
    Expr ca = canonicalize(a), cb = canonicalize(b);
    if (expr_eq(ca, cb)) return {true, false};
    Expr diff = sub(ca, cb);
    if (is_zero(diff)) return {true, false};

    std::set<std::string> names = free_atoms(diff);
    std::mt19937_64 rng(0x5eedc0de);
    std::uniform_real_distribution<double> dist(kEquivalenceLo, kEquivalenceHi);
    int evaluated = 0;
    for (int attempt = 0; attempt < 256 && evaluated < 64; ++attempt) {
        NumericBinding env;
        for (const auto& n : names) env[n] = dist(rng);
        try {
            std::complex<double> v = eval_numeric(diff, env);
            ++evaluated;
            if (std::abs(v) >= 1e-10) return {false, true};
        } catch (const EvalError&) {
            continue;  // pole; resample
        }
    }
    if (evaluated == 0) throw Error("equivalent: evaluation hit a pole at all sample points");
    return {true, true};
}

}  // namespace cartan
