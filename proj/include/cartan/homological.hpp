#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cartan/forms.hpp"

namespace cartan {

class AnsatzInsufficientError : public Error {
public:
    AnsatzInsufficientError(const std::string& what, std::vector<std::string> terms)
        : Error(what), irreducible_terms(std::move(terms)) {}
    std::vector<std::string> irreducible_terms;
};

class DegenerateAnsatzError : public Error {
public:
    explicit DegenerateAnsatzError(const std::string& what) : Error(what) {}
};

class NonlinearResidualError : public Error {
public:
    explicit NonlinearResidualError(const std::string& what) : Error(what) {}
};

/// Perturbed basis: omega^(i) = omega0^(i) + eps * omega1^(i).
struct PerturbedSystem {
    Chart chart;
    std::string independent;  // coordinate whose antiderivatives introduce secular terms
    std::vector<KForm> omega0;
    std::vector<KForm> omega1;
    std::string eps;

    PerturbedSystem(Chart c, std::string indep, std::vector<KForm> w0, std::vector<KForm> w1,
                    std::string eps_symbol)
        : chart(std::move(c)),
          independent(std::move(indep)),
          omega0(std::move(w0)),
          omega1(std::move(w1)),
          eps(std::move(eps_symbol)) {
        if (omega0.size() != omega1.size()) throw Error("PerturbedSystem: basis length mismatch");
        if (omega0.empty()) throw Error("PerturbedSystem: empty basis");
        for (const auto& w : omega0)
            if (w.chart() != chart || w.degree() != 1)
                throw Error("PerturbedSystem: zero-order forms must be 1-forms on the chart");
        for (const auto& w : omega1)
            if (w.chart() != chart || w.degree() != 1)
                throw Error("PerturbedSystem: perturbation forms must be 1-forms on the chart");
        chart.index(independent);
    }

    std::size_t form_count() const { return omega0.size(); }
};

/// Search space for the solver: basis functions for vector-field components
/// (restricted to the masked coordinates) and for the multiplier matrix.
struct Ansatz {
    std::vector<Expr> vf_terms;
    std::vector<Expr> mult_terms;
    std::vector<std::size_t> mask;  // chart coordinate indices where X may be nonzero
    std::vector<std::string> warnings;

    void normalize() {
        auto clean = [](std::vector<Expr>& terms) {
            std::vector<Expr> out;
            for (auto& t : terms) {
                for (const auto& part : sum_terms(canonicalize(t))) {
                    Term tt = term_view(part);
                    if (tt.coeff.is_zero()) continue;
                    tt.coeff = RatC(1);  // basis functions are coefficient-normalized monomials
                    Expr f = term_build(tt);
                    bool dup = false;
                    for (const auto& o : out)
                        if (expr_eq(o, f)) { dup = true; break; }
                    if (!dup) out.push_back(f);
                }
            }
            std::sort(out.begin(), out.end(), ExprLess{});
            terms = std::move(out);
        };
        clean(vf_terms);
        clean(mult_terms);
        std::sort(mask.begin(), mask.end());
        mask.erase(std::unique(mask.begin(), mask.end()), mask.end());
    }
};

struct HomologicalSolution {
    VectorField X;
    std::vector<std::vector<Expr>> lambda;
    PerturbedSystem system;

    struct Diagnostics {
        std::size_t vf_terms = 0;
        std::size_t mult_terms = 0;
        std::size_t unknowns = 0;
        std::size_t equations = 0;
        std::size_t solved = 0;
        std::size_t free_before_sparsify = 0;
    } diagnostics;
};

/// Residual forms of the first-order condition:
/// R_i = omega1^(i) + L_X omega0^(i) - sum_j lambda^(ij) omega0^(j).
inline std::vector<KForm> build_residual(const PerturbedSystem& sys, const VectorField& X,
                                         const std::vector<std::vector<Expr>>& lambda) {
    std::size_t n = sys.form_count();
    if (lambda.size() != n) throw Error("build_residual: lambda row count mismatch");
    std::vector<KForm> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (lambda[i].size() != n) throw Error("build_residual: lambda column count mismatch");
        KForm r = sys.omega1[i] + lie_derivative(X, sys.omega0[i]);
        for (std::size_t j = 0; j < n; ++j) r = r - lambda[i][j] * sys.omega0[j];
        out.push_back(std::move(r));
    }
    return out;
}

namespace detail {

inline constexpr const char* kUnknownPrefix = "@c";

inline bool is_unknown_symbol(const Expr& e) {
    return e->kind == Kind::Symbol && e->name.size() > 2 && e->name[0] == '@' && e->name[1] == 'c';
}

/// Multiply every term by the least common denominator so that no factor
/// carries a negative exponent; preserves the zero set (denominators are
/// nonvanishing on the generic domain).
inline Expr clear_denominators(const Expr& e) {
    std::map<Expr, Rational, ExprLess> lcd;
    for (const auto& term : sum_terms(e)) {
        Term t = term_view(term);
        for (const auto& f : t.factors) {
            if (f.expo < 0) {
                Rational need(-f.expo);
                auto it = lcd.find(f.base);
                if (it == lcd.end() || it->second < need) lcd[f.base] = need;
            }
        }
    }
    if (lcd.empty()) return e;
    std::vector<Expr> multiplier{e};
    for (const auto& [b, q] : lcd) multiplier.push_back(pow(b, q));
    return mul(std::move(multiplier));
}

struct LinearRow {
    std::map<std::size_t, RatC> coeff;  // unknown index -> coefficient
    RatC constant;                      // unknown-free part
    std::string origin;                 // for error reporting
};

/// Split the canonical expression (linear in unknown symbols) into rows
/// keyed by the unknown-free monomial.
inline void collect_rows(const Expr& e, const std::map<std::string, std::size_t>& unknown_index,
                         const std::string& origin, std::map<Expr, LinearRow, ExprLess>& rows) {
    Expr cleared = clear_denominators(e);
    for (const auto& term : sum_terms(cleared)) {
        Term t = term_view(term);
        int unknown = -1;
        Term key;
        key.coeff = RatC(1);
        for (const auto& f : t.factors) {
            if (is_unknown_symbol(f.base)) {
                auto it = unknown_index.find(f.base->name);
                if (it == unknown_index.end())
                    throw NonlinearResidualError("unexpected unknown symbol " + f.base->name);
                if (unknown >= 0 || f.expo != 1)
                    throw NonlinearResidualError("residual is nonlinear in the unknowns: " +
                                                 to_string(term));
                unknown = static_cast<int>(it->second);
            } else {
                key.factors.push_back(f);
            }
        }
        Expr key_expr = term_build(key);
        LinearRow& row = rows[key_expr];
        if (row.origin.empty()) row.origin = origin + " * " + to_string(key_expr);
        if (unknown < 0)
            row.constant += t.coeff;
        else
            row.coeff[static_cast<std::size_t>(unknown)] += t.coeff;
    }
}

/// Numeric linear-independence check for ansatz basis functions
/// (condition threshold 1e8 at random sample points).
inline void check_ansatz_independence(const std::vector<Expr>& terms, const Chart& chart,
                                      const std::string& what) {
    if (terms.size() < 2) return;
    std::set<std::string> names;
    for (const auto& t : terms) collect_atoms(t, names);
    for (const auto& c : chart.names()) names.insert(c);
    std::mt19937_64 rng(0xa25a71ULL);
    std::uniform_real_distribution<double> dist(0.35, 1.65);
    const std::size_t rows = terms.size() + 8;
    Eigen::MatrixXd M(rows, terms.size());
    for (std::size_t r = 0; r < rows;) {
        NumericBinding env;
        for (const auto& n : names) env[n] = dist(rng);
        try {
            for (std::size_t c = 0; c < terms.size(); ++c) {
                std::complex<double> v = eval_numeric(terms[c], env);
                M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::abs(v);
            }
            ++r;
        } catch (const EvalError&) {
            continue;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > 1e8)
        throw DegenerateAnsatzError(what + ": basis functions are numerically dependent (condition > 1e8)");
}

}  // namespace detail

/// Closure of the ansatz under (a) multiplication by the coefficient
/// functions of the system forms, (b) antiderivatives with respect to the
/// independent coordinate (the source of secular terms), and (c) partial
/// derivatives. Deduplicated by canonical form, deterministic order.
/// Antiderivatives outside the supported class are skipped with a warning.
inline Ansatz extend_ansatz(const Ansatz& a, const PerturbedSystem& sys, int depth) {
    if (depth < 0 || depth > 3) throw Error("extend_ansatz: depth must be in [0, 3]");
    Ansatz out = a;
    out.normalize();

    // coefficient monomials appearing in the system forms
    std::vector<Expr> coeff_fns;
    auto add_coeff = [&](const Expr& e) {
        for (const auto& term : sum_terms(e)) {
            Term t = term_view(term);
            if (t.factors.empty()) continue;  // bare constants contribute nothing
            t.coeff = RatC(1);
            Expr f = term_build(t);
            for (const auto& o : coeff_fns)
                if (expr_eq(o, f)) { f = nullptr; break; }
            if (f) coeff_fns.push_back(f);
        }
    };
    for (const auto& w : sys.omega0)
        for (const auto& c : w.components()) add_coeff(c);
    for (const auto& w : sys.omega1)
        for (const auto& c : w.components()) add_coeff(c);
    std::sort(coeff_fns.begin(), coeff_fns.end(), ExprLess{});

    auto extend_list = [&](std::vector<Expr> terms) {
        for (int d = 0; d < depth; ++d) {
            std::vector<Expr> generated = terms;
            auto emit = [&](const Expr& e) {
                for (const auto& part : sum_terms(canonicalize(e))) {
                    Term t = term_view(part);
                    if (t.coeff.is_zero()) continue;
                    t.coeff = RatC(1);
                    generated.push_back(term_build(t));
                }
            };
            for (const auto& b : terms) {
                for (const auto& c : coeff_fns) emit(mul(b, c));
                try {
                    emit(antiderivative(b, sys.independent));
                } catch (const UnsupportedIntegralError& err) {
                    out.warnings.push_back(std::string("extend_ansatz: skipped ") + err.what());
                }
                for (const auto& coord : sys.chart.names()) emit(differentiate(b, coord));
            }
            std::sort(generated.begin(), generated.end(), ExprLess{});
            generated.erase(std::unique(generated.begin(), generated.end(),
                                        [](const Expr& x, const Expr& y) { return expr_eq(x, y); }),
                            generated.end());
            terms = std::move(generated);
        }
        return terms;
    };

    out.vf_terms = extend_list(out.vf_terms);
    out.mult_terms = extend_list(out.mult_terms);
    return out;
}

/// Solve the first-order homological condition by exact linear algebra:
/// expand X and lambda over the ansatz with fresh unknown coefficients,
/// equate every canonical-monomial coefficient of the residual to zero,
/// and solve the sparse exact system. Underdetermined systems take the
/// solution found by greedily zeroing unknowns in canonical order
/// (vector-field unknowns first), which is the documented deterministic
/// sparse choice.
inline HomologicalSolution solve(const PerturbedSystem& sys, const Ansatz& ansatz_in) {
    Ansatz ansatz = ansatz_in;
    ansatz.normalize();
    if (ansatz.mask.empty())
        for (std::size_t i = 0; i < sys.chart.dim(); ++i) ansatz.mask.push_back(i);
    for (std::size_t m : ansatz.mask)
        if (m >= sys.chart.dim()) throw Error("solve: mask index out of range");

    detail::check_ansatz_independence(ansatz.vf_terms, sys.chart, "vector-field ansatz");
    detail::check_ansatz_independence(ansatz.mult_terms, sys.chart, "multiplier ansatz");

    const std::size_t n = sys.form_count();
    const std::size_t nb = ansatz.vf_terms.size();
    const std::size_t nm = ansatz.mult_terms.size();

    // unknown layout: vector-field coefficients first, multipliers after
    std::vector<std::string> unknown_names;
    std::map<std::string, std::size_t> unknown_index;
    auto fresh = [&]() {
        std::string name = std::string(detail::kUnknownPrefix) + std::to_string(unknown_names.size());
        unknown_index[name] = unknown_names.size();
        unknown_names.push_back(name);
        return symbol(name);
    };

    std::vector<Expr> X_comp(sys.chart.dim(), constant(0L));
    for (std::size_t m : ansatz.mask) {
        std::vector<Expr> parts;
        for (const auto& b : ansatz.vf_terms) parts.push_back(mul(fresh(), b));
        X_comp[m] = add(std::move(parts));
    }
    VectorField X(sys.chart, X_comp);

    std::vector<std::vector<Expr>> lambda(n, std::vector<Expr>(n, constant(0L)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<Expr> parts;
            for (const auto& mu : ansatz.mult_terms) parts.push_back(mul(fresh(), mu));
            lambda[i][j] = add(std::move(parts));
        }

    const std::size_t n_unknowns = unknown_names.size();

    std::vector<KForm> residual = build_residual(sys, X, lambda);

    // one equation per (form, coordinate, canonical monomial)
    std::vector<detail::LinearRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < sys.chart.dim(); ++k) {
            std::map<Expr, detail::LinearRow, ExprLess> grouped;
            std::string origin =
                "form " + std::to_string(i + 1) + ", d" + sys.chart.name(k) + " coefficient";
            detail::collect_rows(residual[i].at(k), unknown_index, origin, grouped);
            for (auto& [key, row] : grouped) rows.push_back(std::move(row));
        }
    }

    // sparse exact Gaussian elimination to reduced row echelon form
    std::vector<std::map<std::size_t, RatC>> mat;
    std::vector<RatC> rhs;
    std::vector<std::string> row_origin;
    for (auto& r : rows) {
        if (r.coeff.empty()) {
            if (!r.constant.is_zero())
                throw AnsatzInsufficientError(
                    "ansatz insufficient: irreducible residual term " + r.origin, {r.origin});
            continue;
        }
        mat.push_back(r.coeff);
        rhs.push_back(-r.constant);  // move constants to the right-hand side
        row_origin.push_back(r.origin);
    }

    std::vector<long> pivot_row_of_col(n_unknowns, -1);
    std::vector<bool> row_used(mat.size(), false);
    std::vector<std::size_t> pivot_cols;
    for (std::size_t col = 0; col < n_unknowns; ++col) {
        // deterministic pivot: fewest nonzeros, then lowest row index
        long best = -1;
        std::size_t best_size = 0;
        for (std::size_t r = 0; r < mat.size(); ++r) {
            if (row_used[r]) continue;
            auto it = mat[r].find(col);
            if (it == mat[r].end() || it->second.is_zero()) continue;
            if (best < 0 || mat[r].size() < best_size) {
                best = static_cast<long>(r);
                best_size = mat[r].size();
            }
        }
        if (best < 0) continue;
        std::size_t p = static_cast<std::size_t>(best);
        row_used[p] = true;
        pivot_row_of_col[col] = static_cast<long>(p);
        pivot_cols.push_back(col);
        RatC inv = RatC(1) / mat[p][col];
        for (auto& [c, v] : mat[p]) v = v * inv;
        rhs[p] = rhs[p] * inv;
        for (std::size_t r = 0; r < mat.size(); ++r) {
            if (r == p) continue;
            auto it = mat[r].find(col);
            if (it == mat[r].end() || it->second.is_zero()) continue;
            RatC factor = it->second;
            for (const auto& [c, v] : mat[p]) {
                RatC nv = mat[r][c] - factor * v;
                if (nv.is_zero()) mat[r].erase(c);
                else mat[r][c] = nv;
            }
            rhs[r] = rhs[r] - factor * rhs[p];
        }
    }

    // inconsistent rows signal an insufficient ansatz
    {
        std::vector<std::string> bad;
        for (std::size_t r = 0; r < mat.size(); ++r)
            if (!row_used[r] && mat[r].empty() && !rhs[r].is_zero()) bad.push_back(row_origin[r]);
        if (!bad.empty())
            throw AnsatzInsufficientError(
                "ansatz insufficient: " + std::to_string(bad.size()) +
                    " irreducible residual term(s), first: " + bad.front(),
                bad);
    }

    // particular solution (free unknowns zero) and nullspace basis
    std::vector<RatC> sol(n_unknowns, RatC(0));
    for (std::size_t col : pivot_cols) {
        std::size_t p = static_cast<std::size_t>(pivot_row_of_col[col]);
        sol[col] = rhs[p];
    }
    std::vector<std::size_t> free_cols;
    for (std::size_t col = 0; col < n_unknowns; ++col)
        if (pivot_row_of_col[col] < 0) free_cols.push_back(col);
    std::vector<std::vector<RatC>> nullspace;
    for (std::size_t fc : free_cols) {
        std::vector<RatC> v(n_unknowns, RatC(0));
        v[fc] = RatC(1);
        for (std::size_t col : pivot_cols) {
            std::size_t p = static_cast<std::size_t>(pivot_row_of_col[col]);
            auto it = mat[p].find(fc);
            if (it != mat[p].end()) v[col] = -it->second;
        }
        nullspace.push_back(std::move(v));
    }
    const std::size_t free_count = nullspace.size();

    // greedy sparsification: zero unknowns in canonical order while the
    // remaining affine freedom allows it
    for (std::size_t idx = 0; idx < n_unknowns && !nullspace.empty(); ++idx) {
        long chosen = -1;
        for (std::size_t r = 0; r < nullspace.size(); ++r)
            if (!nullspace[r][idx].is_zero()) { chosen = static_cast<long>(r); break; }
        if (chosen < 0) continue;  // coordinate fixed at its current value
        std::size_t cr = static_cast<std::size_t>(chosen);
        RatC scale = sol[idx] / nullspace[cr][idx];
        for (std::size_t k = 0; k < n_unknowns; ++k) sol[k] = sol[k] - scale * nullspace[cr][k];
        for (std::size_t r = 0; r < nullspace.size(); ++r) {
            if (r == cr) continue;
            if (nullspace[r][idx].is_zero()) continue;
            RatC f = nullspace[r][idx] / nullspace[cr][idx];
            for (std::size_t k = 0; k < n_unknowns; ++k)
                nullspace[r][k] = nullspace[r][k] - f * nullspace[cr][k];
        }
        nullspace.erase(nullspace.begin() + static_cast<long>(chosen));
    }

    // substitute the solved coefficients
    Binding values;
    for (std::size_t k = 0; k < n_unknowns; ++k) values.bind(unknown_names[k], constant(sol[k]));

    std::vector<Expr> X_solved;
    for (std::size_t k = 0; k < sys.chart.dim(); ++k) X_solved.push_back(substitute(X.at(k), values));
    VectorField Xs(sys.chart, X_solved);
    std::vector<std::vector<Expr>> lambda_solved(n, std::vector<Expr>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lambda_solved[i][j] = substitute(lambda[i][j], values);

    // independent soundness pass: the symbolic residual must vanish
    std::vector<KForm> check = build_residual(sys, Xs, lambda_solved);
    for (const auto& r : check)
        if (!r.is_zero_form())
            throw Error("solve: internal error, nonzero symbolic residual after solving");

    HomologicalSolution out{std::move(Xs), std::move(lambda_solved), sys};
    out.diagnostics.vf_terms = nb;
    out.diagnostics.mult_terms = nm;
    out.diagnostics.unknowns = n_unknowns;
    out.diagnostics.equations = mat.size();
    out.diagnostics.solved = pivot_cols.size();
    out.diagnostics.free_before_sparsify = free_count;
    return out;
}

/// Per-coordinate numeric sampling box.
using SampleBox = std::map<std::string, std::pair<double, double>>;

/// Max absolute residual coefficient over random points drawn from the box.
/// Pure reduction; the sample sequence is fixed by the seed, so results are
/// deterministic and independent of evaluation order.
inline double residual_norm_numeric(const HomologicalSolution& sol, const PerturbedSystem& sys,
                                    int n_points, const SampleBox& box, std::uint64_t seed = 0x9e3779b9) {
    std::vector<KForm> residual = build_residual(sys, sol.X, sol.lambda);
    std::set<std::string> names;
    for (const auto& r : residual)
        for (const auto& c : r.components()) collect_atoms(c, names);
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    int evaluated = 0;
    for (int p = 0; p < n_points * 4 && evaluated < n_points; ++p) {
        NumericBinding env;
        bool ok = true;
        for (const auto& nme : names) {
            auto it = box.find(nme);
            if (it == box.end()) { ok = false; break; }
            std::uniform_real_distribution<double> dist(it->second.first, it->second.second);
            env[nme] = dist(rng);
        }
        if (!ok) throw Error("residual_norm_numeric: sampling box missing a symbol");
        try {
            for (const auto& r : residual)
                for (const auto& c : r.components())
                    worst = std::max(worst, std::abs(eval_numeric(c, env)));
            ++evaluated;
        } catch (const EvalError&) {
            continue;
        }
    }
    if (evaluated == 0) throw Error("residual_norm_numeric: all sample points singular");
    return worst;
}

}  // namespace cartan
