#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cartan/homological.hpp"

namespace cartan {

class ResonanceError : public Error {
public:
    explicit ResonanceError(const std::string& what) : Error(what) {}
};

/// One transformed invariant: `implicit` vanishes on first-order solution
/// curves; when the designated constant occurs once, `solved` holds the
/// explicit expression with constant = solved.
struct Relation {
    Expr implicit;                   // == 0 along solutions
    std::string constant;            // designated constant symbol
    std::optional<Expr> solved;      // constant = solved, when extractable
    std::string variable;            // the chart variable the invariant tracks
};

struct AsymptoticSolution {
    std::vector<Relation> relations;
    std::optional<Expr> explicit_solution;  // set by downstream steps (e.g. the linear ODE)
    std::vector<std::string> notes;         // provenance of each transformation step
};

/// First-order push along the near-identity map: f -> f + eps * L_X f.
inline Expr push_function(const VectorField& X, const std::string& eps, const Expr& f) {
    return add(canonicalize(f), mul(symbol(eps), lie_derivative(X, f)));
}

/// Push zero-order invariants through the solved map, apply the declared
/// substitutions, and solve each relation for its constant where the
/// constant occurs once. Inside O(eps) terms, variables resolved by earlier
/// relations are replaced by their constants (first-order consistency).
inline AsymptoticSolution transform_invariant(const HomologicalSolution& sol, const std::string& eps,
                                              const std::vector<std::pair<Expr, std::string>>& invariants,
                                              const Binding& substitutions = {}) {
    AsymptoticSolution out;
    Binding resolved;  // chart variable -> constant symbol, filled as relations resolve
    for (const auto& [f_in, constant] : invariants) {
        Expr f = canonicalize(f_in);

        // the invariant must be constant on zero-order curves: df in span(omega0)
        KForm df = exterior_derivative(KForm::function(sol.system.chart, f));
        try {
            if (!in_span(df, sol.system.omega0).has_value())
                throw Error("transform_invariant: d(" + to_string(f) +
                            ") is not in the zero-order span; invariant is not constant on "
                            "unperturbed curves");
        } catch (const DegenerateBasisError&) {
            // rank-deficient zero-order basis is caught when the system is built
            throw;
        }

        Expr pushed = push_function(sol.X, eps, f);
        pushed = substitute(pushed, substitutions);

        // first-order consistency: previously resolved variables inside the
        // O(eps) part become their zero-order constants
        Expr zero_part = series_coefficient(pushed, eps, 0);
        Expr first_part = series_coefficient(pushed, eps, 1);
        first_part = substitute(first_part, resolved);
        pushed = add(zero_part, mul(symbol(eps), first_part));

        Relation rel;
        rel.constant = constant;
        rel.implicit = pushed;

        // identify the tracked chart variable (unique chart symbol in f)
        std::string variable;
        for (const auto& name : sol.system.chart.names())
            if (contains_symbol(f, name)) {
                if (!variable.empty()) variable.clear();
                else variable = name;
                if (variable.empty()) break;
            }
        rel.variable = variable;

        // solve for the constant when it occurs in exactly one additive term,
        // linearly and with a constant coefficient
        std::vector<Expr> with_const, without_const;
        for (const auto& term : sum_terms(pushed)) {
            (contains_symbol(term, constant) ? with_const : without_const).push_back(term);
        }
        if (with_const.size() == 1) {
            Term t = term_view(with_const[0]);
            bool linear = true;
            Term rest = t;
            rest.factors.clear();
            for (const auto& fac : t.factors) {
                if (fac.base->kind == Kind::Symbol && fac.base->name == constant) {
                    if (fac.expo != 1) linear = false;
                } else if (contains_symbol(fac.base, constant)) {
                    linear = false;
                } else {
                    rest.factors.push_back(fac);
                }
            }
            if (linear) {
                // pushed = rest * constant + without  =>  constant = -without / rest
                Expr rest_expr = term_build(rest);
                rel.solved = neg(div(add(without_const), rest_expr));
            }
        }
        if (rel.solved && !variable.empty()) {
            Binding b;
            b.bind(variable, symbol(constant));
            // record var -> constant for subsequent O(eps) replacements
            if (!resolved.find(variable)) resolved.bind(variable, symbol(constant));
            (void)b;
        }
        out.notes.push_back("pushed invariant " + to_string(f) + " for constant " + constant);
        out.relations.push_back(std::move(rel));
    }
    return out;
}

/// Drop additive terms carrying sin/cos factors whose argument depends on
/// var (unbounded oscillations); polynomial-in-var and var-free terms stay.
inline Expr secular_limit(const Expr& e, const std::string& var) {
    std::function<bool(const Expr&)> has_unbounded_trig = [&](const Expr& x) -> bool {
        if (x->kind == Kind::Func && (x->fn == Fn::Sin || x->fn == Fn::Cos) &&
            contains_symbol(x->kids[0], var))
            return true;
        for (const auto& k : x->kids)
            if (has_unbounded_trig(k)) return true;
        return false;
    };
    std::vector<Expr> kept;
    for (const auto& term : sum_terms(canonicalize(e)))
        if (!has_unbounded_trig(term)) kept.push_back(term);
    return add(std::move(kept));
}

/// Solve y' + coeff*y = forcing for constant coeff and exponential-sum
/// forcing; general solution with homogeneous constant `hom_constant`.
/// Resonant forcing (a = -coeff) is an error.
inline Expr solve_linear_first_order(const Expr& coeff_in, const Expr& forcing_in,
                                     const std::string& indep, const std::string& hom_constant = "B") {
    Expr coeff = canonicalize(coeff_in);
    Expr forcing = canonicalize(forcing_in);
    if (contains_symbol(coeff, indep))
        throw Error("solve_linear_first_order: coefficient must not depend on " + indep);

    std::vector<Expr> parts;
    parts.push_back(mul(symbol(hom_constant), exp(mul(neg(coeff), symbol(indep)))));

    for (const auto& term : sum_terms(forcing)) {
        Term t = term_view(term);
        Expr rate = constant(0L);  // exponent slope a in c*e^{a*indep}
        Term rest = t;
        rest.factors.clear();
        for (const auto& f : t.factors) {
            if (f.base->kind == Kind::Func && f.base->fn == Fn::Exp && f.expo == 1 &&
                contains_symbol(f.base->kids[0], indep)) {
                Expr slope, offset;
                if (!detail::split_linear(f.base->kids[0], indep, slope, offset))
                    throw Error("solve_linear_first_order: forcing term not of the form c*exp(a*" +
                                indep + "): " + to_string(term));
                rate = slope;
                rest.factors.push_back(f);
            } else if (contains_symbol(f.base, indep)) {
                throw Error("solve_linear_first_order: forcing term not in the supported class: " +
                            to_string(term));
            } else {
                rest.factors.push_back(f);
            }
        }
        Expr denom = add(rate, coeff);
        if (is_zero(denom))
            throw ResonanceError("solve_linear_first_order: resonant forcing term " + to_string(term) +
                                 " (rate equals -coefficient)");
        parts.push_back(div(term_build(rest), denom));
    }
    return add(std::move(parts));
}

/// From the secular-limited relation for `constant` (e.g. u0 = u - 3/4 eps t),
/// apply the declared change of variables var = c * R^k (and its constant
/// counterpart) and return the explicit amplitude R(t).
inline Expr amplitude_law(const AsymptoticSolution& asym, const std::string& constant_symbol,
                          const std::string& var, const Expr& var_change, const std::string& out_symbol,
                          const Binding& constant_change, const std::string& secular_var) {
    const Relation* rel = nullptr;
    for (const auto& r : asym.relations)
        if (r.constant == constant_symbol) rel = &r;
    if (!rel || !rel->solved)
        throw Error("amplitude_law: no solved relation for constant " + constant_symbol);

    // the declared change must be a monomial c * R^k in the output symbol
    Term ct = term_view(canonicalize(var_change));
    if (ct.factors.size() != 1 || ct.factors[0].base->kind != Kind::Symbol ||
        ct.factors[0].base->name != out_symbol || !ct.coeff.is_real())
        throw Error("amplitude_law: change of variables must be a monomial in " + out_symbol);
    Rational k = ct.factors[0].expo;
    RatC c = ct.coeff;

    // constant = var - eps * secular  =>  var = constant + eps * secular
    Expr implicit = sub(symbol(constant_symbol), *rel->solved);  // == 0
    implicit = secular_limit(implicit, secular_var);
    std::vector<Expr> with_var, without_var;
    for (const auto& term : sum_terms(implicit))
        (contains_symbol(term, var) ? with_var : without_var).push_back(term);
    if (with_var.size() != 1)
        throw Error("amplitude_law: relation is not explicitly solvable for " + var);
    Term vt = term_view(with_var[0]);
    if (vt.factors.size() != 1 || vt.factors[0].expo != 1)
        throw Error("amplitude_law: relation is not linear in " + var);
    Expr var_expr = neg(div(add(without_var), constant(vt.coeff)));

    var_expr = substitute(var_expr, constant_change);
    // var = c * R^k  =>  R = (var/c)^(1/k)
    if (k == 0) throw Error("amplitude_law: non-invertible change of variables");
    Expr ratio = div(var_expr, constant(c));
    return pow(ratio, Rational(Rational(1) / k));
}

/// The two WKB mode relations and, when the frequency has an antiderivative
/// in the supported class, the explicit phase solutions
/// y = exp(+-(i/eps) integral Omega dx).
struct WkbPhase {
    Expr relation_plus;   // y' - (i/eps) Omega y  == 0
    Expr relation_minus;  // y' + (i/eps) Omega y  == 0
    std::optional<Expr> solution_plus;
    std::optional<Expr> solution_minus;
    Expr phase;      // integral of Omega, or an opaque placeholder Phi(x)
    bool exact_phase = false;
};

/// Recover the WKB modes from the transformed u-invariant: with the
/// zero-order constant set to zero, u + eps_f * v / Omega^2 = 0 gives
/// z^2 = -Omega^2 y^2 / eps^2 and the first-order equations
/// y' = +-(i/eps) Omega y.
inline WkbPhase wkb_phase(const HomologicalSolution& sol, const Expr& omega, const std::string& x,
                          const std::string& true_eps, const std::string& y) {
    WkbPhase out;
    Expr om = canonicalize(omega);
    Expr inv_eps = pow(symbol(true_eps), Rational(-1));
    Expr iy = imaginary_unit();

    Expr yprime = deriv_placeholder(y, 1);
    Expr mode = mul({iy, inv_eps, om, symbol(y)});
    out.relation_plus = sub(yprime, mode);
    out.relation_minus = add(yprime, mode);

    try {
        out.phase = antiderivative(om, x);
        out.exact_phase = true;
    } catch (const UnsupportedIntegralError&) {
        out.phase = deriv_placeholder("Phi", 0, symbol(x));  // Phi'(x) = Omega(x), unevaluated
        out.exact_phase = false;
    }
    Expr arg = mul({iy, inv_eps, out.phase});
    out.solution_plus = exp(arg);
    out.solution_minus = exp(neg(arg));
    return out;
}

/// Split a relation const = base + eps*ln(E) into E = A * exp(-base/eps),
/// introducing the declared constant A = exp(const/eps). Returns the pair
/// (E, right-hand side).
inline std::pair<Expr, Expr> exponentiate_log_relation(const Relation& rel, const std::string& eps,
                                                       const std::string& big_constant) {
    if (!rel.solved) throw Error("exponentiate_log_relation: relation is not solved for its constant");
    std::vector<Expr> log_terms, base_terms;
    for (const auto& term : sum_terms(*rel.solved)) {
        Term t = term_view(term);
        bool has_ln = false;
        for (const auto& f : t.factors)
            if (f.base->kind == Kind::Func && f.base->fn == Fn::Ln) has_ln = true;
        (has_ln ? log_terms : base_terms).push_back(term);
    }
    if (log_terms.size() != 1)
        throw Error("exponentiate_log_relation: expected exactly one logarithmic term");
    Term lt = term_view(log_terms[0]);
    Expr log_arg = nullptr;
    Term remainder = lt;
    remainder.factors.clear();
    for (const auto& f : lt.factors) {
        if (f.base->kind == Kind::Func && f.base->fn == Fn::Ln && f.expo == 1 && !log_arg)
            log_arg = f.base->kids[0];
        else
            remainder.factors.push_back(f);
    }
    // the log coefficient must be exactly eps
    Expr coeff = term_build(remainder);
    if (!log_arg || !expr_eq(canonicalize(coeff), symbol(eps)))
        throw Error("exponentiate_log_relation: logarithm coefficient is not the perturbation symbol");

    Expr base = add(base_terms);
    // const = base + eps ln(E)  =>  E = exp((const - base)/eps) = A * exp(-base/eps)
    Expr rhs = mul(symbol(big_constant), exp(neg(div(base, symbol(eps)))));
    return {log_arg, rhs};
}

}  // namespace cartan
