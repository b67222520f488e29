#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cartan/cases_data.hpp"
#include "cartan/problem.hpp"
#include "cartan/transform.hpp"
#include "cartan/validate.hpp"

namespace cartan {

struct RunOptions {
    std::optional<std::vector<double>> eps_ladder;
    std::optional<double> tolerance;
    std::optional<int> ansatz_depth;
};

/// Full case output: solved generator, transformed relations, closed-form
/// results, and the validation report. Regenerating a report from the same
/// inputs is byte-identical.
struct Report {
    std::string case_name;
    std::vector<std::pair<std::string, std::string>> generator;       // coordinate -> expr
    std::vector<std::vector<std::string>> multipliers;                // lambda matrix
    HomologicalSolution::Diagnostics diagnostics;
    std::vector<std::string> ansatz_warnings;

    std::vector<std::pair<std::string, std::string>> relations;       // constant -> solved expr
    std::optional<std::string> first_order_equation;                  // e.g. y' + y = A exp(-x/eps)
    std::optional<std::string> solution;
    std::optional<std::string> amplitude;
    std::vector<std::pair<std::string, std::string>> wkb_results;     // label -> expr

    ValidationReport validation;
    bool has_validation = false;
    bool passed = true;

    Json to_json() const {
        Json j;
        j["schema_version"] = 1;
        j["case"] = case_name;
        Json gen = Json::object();
        for (const auto& [k, v] : generator) gen[k] = v;
        j["generator"] = gen;
        j["multipliers"] = multipliers;
        j["diagnostics"] = {{"vector_field_terms", diagnostics.vf_terms},
                            {"multiplier_terms", diagnostics.mult_terms},
                            {"unknowns", diagnostics.unknowns},
                            {"equations", diagnostics.equations},
                            {"solved", diagnostics.solved},
                            {"free_before_sparsify", diagnostics.free_before_sparsify}};
        if (!ansatz_warnings.empty()) j["ansatz_warnings"] = ansatz_warnings;
        Json rel = Json::array();
        for (const auto& [c, e] : relations) rel.push_back({{"constant", c}, {"solved", e}});
        j["relations"] = rel;
        if (first_order_equation) j["first_order_equation"] = *first_order_equation;
        if (solution) j["solution"] = *solution;
        if (amplitude) j["amplitude"] = *amplitude;
        if (!wkb_results.empty()) {
            Json w = Json::array();
            for (const auto& [k, v] : wkb_results) w.push_back({{"label", k}, {"expr", v}});
            j["wkb"] = w;
        }
        if (has_validation) {
            Json v;
            Json checks = Json::array();
            for (const auto& c : validation.checks)
                checks.push_back({{"name", c.name},
                                  {"passed", c.passed},
                                  {"value", c.value},
                                  {"threshold", c.threshold},
                                  {"comparison", c.comparison}});
            v["checks"] = checks;
            Json errs = Json::array();
            for (const auto& [eps, err] : validation.eps_errors)
                errs.push_back({{"eps", eps}, {"max_error", err}});
            v["eps_errors"] = errs;
            if (validation.has_scaling) v["scaling_exponent"] = validation.scaling_exponent;
            Json ann = Json::array();
            for (const auto& [label, value] : validation.annihilation)
                ann.push_back({{"form", label}, {"max_residual", value}});
            v["annihilation"] = ann;
            v["residual_norm"] = validation.residual_norm;
            j["validation"] = v;
        }
        j["passed"] = passed;
        return j;
    }

    std::string solution_text() const {
        std::ostringstream os;
        os << "case: " << case_name << "\n\n";
        os << "first-order generator:\n";
        for (const auto& [k, v] : generator) os << "  X[" << k << "] = " << v << "\n";
        os << "\nmultipliers:\n";
        for (std::size_t i = 0; i < multipliers.size(); ++i)
            for (std::size_t jx = 0; jx < multipliers[i].size(); ++jx)
                os << "  lambda[" << i + 1 << "][" << jx + 1 << "] = " << multipliers[i][jx] << "\n";
        if (!relations.empty()) {
            os << "\ntransformed invariants:\n";
            for (const auto& [c, e] : relations) os << "  " << c << " = " << e << "\n";
        }
        if (first_order_equation) os << "\nfirst-order equation:\n  " << *first_order_equation << "\n";
        if (solution) os << "\nuniform solution:\n  y = " << *solution << "\n";
        if (amplitude) os << "\namplitude law:\n  R = " << *amplitude << "\n";
        if (!wkb_results.empty()) {
            os << "\nwkb modes:\n";
            for (const auto& [k, v] : wkb_results) os << "  " << k << ": " << v << "\n";
        }
        if (has_validation) {
            os << "\nchecks:\n";
            for (const auto& c : validation.checks)
                os << "  [" << (c.passed ? "pass" : "FAIL") << "] " << c.name << " (value "
                   << format_double(c.value) << ", " << c.comparison << " "
                   << format_double(c.threshold) << ")\n";
        }
        os << "\nresult: " << (passed ? "pass" : "FAIL") << "\n";
        return os.str();
    }
};

namespace driver_detail {

inline Expr numeric_constant(double v) { return constant(RatC(rational_from_double(v))); }

inline Binding numeric_binding(const std::vector<std::pair<std::string, double>>& vals) {
    Binding b;
    for (const auto& [k, v] : vals) b.bind(k, numeric_constant(v));
    return b;
}

/// Grid of n points across [a, b], endpoints included.
inline std::vector<double> make_grid(double a, double b, int n) {
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

inline void add_check(ValidationReport& rep, std::string name, double value, double threshold,
                      const std::string& comparison, bool passed) {
    rep.checks.push_back({std::move(name), passed, value, threshold, comparison});
}

/// Fit the linear constants of an explicit solution against derivative
/// conditions at the span start: solve the 2x2 system in doubles.
inline std::pair<double, double> fit_two_constants(const Expr& solution, const std::string& indep,
                                                   const std::string& c1, const std::string& c2,
                                                   double at, double v0, double v1,
                                                   const NumericBinding& params) {
    Expr dsol = differentiate(solution, indep);
    auto eval_basis = [&](const Expr& e, double a, double b) {
        NumericBinding env = params;
        env[indep] = at;
        env[c1] = a;
        env[c2] = b;
        return eval_numeric(e, env).real();
    };
    double m00 = eval_basis(solution, 1.0, 0.0), m01 = eval_basis(solution, 0.0, 1.0);
    double m10 = eval_basis(dsol, 1.0, 0.0), m11 = eval_basis(dsol, 0.0, 1.0);
    double det = m00 * m11 - m01 * m10;
    if (std::abs(det) < 1e-300) throw Error("fit_two_constants: singular condition system");
    double a = (v0 * m11 - v1 * m01) / det;
    double b = (m00 * v1 - m10 * v0) / det;
    return {a, b};
}

}  // namespace driver_detail

/// Execute the full pipeline for a parsed problem file:
/// forms -> homological solve -> invariant transform -> declared closed-form
/// steps -> numeric validation. Every declared acceptance check lands in the
/// report; report.passed mirrors them.
inline Report run_case(const ProblemFile& problem, const RunOptions& options = {}) {
    using driver_detail::add_check;
    using driver_detail::make_grid;
    using driver_detail::numeric_constant;

    problem.check_declarations();

    Report report;
    report.case_name = problem.name;

    PerturbedSystem sys = problem.make_system();
    Ansatz ansatz = problem.make_ansatz();
    int depth = options.ansatz_depth.value_or(problem.extend_depth);
    if (depth > 0) ansatz = extend_ansatz(ansatz, sys, depth);
    report.ansatz_warnings = ansatz.warnings;

    HomologicalSolution sol = solve(sys, ansatz);
    report.diagnostics = sol.diagnostics;
    for (std::size_t i = 0; i < sys.chart.dim(); ++i)
        report.generator.push_back({sys.chart.name(i), to_string(sol.X.at(i))});
    for (std::size_t i = 0; i < sys.form_count(); ++i) {
        std::vector<std::string> row;
        for (std::size_t j = 0; j < sys.form_count(); ++j) row.push_back(to_string(sol.lambda[i][j]));
        report.multipliers.push_back(std::move(row));
    }

    // declared expectation: exact generator match
    for (const auto& [coord, text] : problem.expected_generator) {
        bool ok = expr_eq(sol.X.at(sys.chart.index(coord)), parse(text));
        add_check(report.validation, "generator_matches_" + coord, ok ? 1.0 : 0.0, 1.0, "==", ok);
        report.has_validation = true;
    }

    // symbolic residual re-verification (independent of the solve path)
    {
        bool zero = true;
        for (const auto& r : build_residual(sys, sol.X, sol.lambda))
            if (!r.is_zero_form()) zero = false;
        add_check(report.validation, "symbolic_residual_zero", zero ? 1.0 : 0.0, 1.0, "==", zero);
        report.has_validation = true;
    }

    // numeric residual over the declared sampling box
    if (!problem.sampling_box.empty()) {
        double bound = problem.validation ? problem.validation->residual_norm_max : 1e-9;
        double norm = residual_norm_numeric(sol, sys, 100, problem.make_sampling_box());
        report.validation.residual_norm = norm;
        add_check(report.validation, "residual_norm_numeric", norm, bound, "<=", norm <= bound);
        report.has_validation = true;
    }

    // invariant transformation
    std::vector<std::pair<Expr, std::string>> invariants;
    for (const auto& iv : problem.invariants) invariants.push_back({parse(iv.expr), iv.constant});
    AsymptoticSolution asym;
    if (!invariants.empty()) {
        asym = transform_invariant(sol, problem.eps, invariants, problem.make_substitutions());
        for (const auto& rel : asym.relations)
            report.relations.push_back(
                {rel.constant, rel.solved ? to_string(*rel.solved) : to_string(rel.implicit)});
    }

    // boundary-layer style closed form: exponentiate the log relation and
    // solve the resulting first-order linear equation
    Expr solution_expr = nullptr;
    if (problem.exp_relation) {
        const Relation* rel = nullptr;
        for (const auto& r : asym.relations)
            if (r.constant == problem.exp_relation->constant) rel = &r;
        if (!rel) throw Error("run_case: exp_relation names an unknown constant");
        auto [lhs, rhs] = exponentiate_log_relation(*rel, problem.eps, problem.exp_relation->new_constant);

        if (!problem.linear_ode) throw Error("run_case: exp_relation requires a linear_ode step");
        const std::string& dep = problem.linear_ode->dependent;
        const std::string& indep = problem.linear_ode->independent;

        // split lhs = alpha * dep' + beta * dep (+ gamma)
        Expr alpha = constant(0L), beta = constant(0L), gamma = constant(0L);
        for (const auto& term : sum_terms(lhs)) {
            Term t = term_view(term);
            bool has_dp = false, has_dep = false;
            Term rest = t;
            rest.factors.clear();
            for (const auto& f : t.factors) {
                if (f.base->kind == Kind::FuncDeriv && f.base->name == dep && f.base->deriv_order == 1 &&
                    f.base->kids.empty() && f.expo == 1)
                    has_dp = true;
                else if (f.base->kind == Kind::Symbol && f.base->name == dep && f.expo == 1)
                    has_dep = true;
                else
                    rest.factors.push_back(f);
            }
            Expr r = term_build(rest);
            if (has_dp && !has_dep) alpha = add(alpha, r);
            else if (has_dep && !has_dp) beta = add(beta, r);
            else gamma = add(gamma, term);
        }
        if (is_zero(alpha))
            throw Error("run_case: relation is not a first-order equation in " + dep);
        Expr coeff = div(beta, alpha);
        Expr forcing = div(sub(rhs, gamma), alpha);
        report.first_order_equation =
            dep + "' + (" + to_string(coeff) + ")*" + dep + " = " + to_string(forcing);
        solution_expr =
            solve_linear_first_order(coeff, forcing, indep, problem.linear_ode->homogeneous_constant);
        report.solution = to_string(solution_expr);
        if (problem.expected_solution) {
            bool ok = expr_eq(solution_expr, parse(*problem.expected_solution));
            add_check(report.validation, "solution_matches", ok ? 1.0 : 0.0, 1.0, "==", ok);
            report.has_validation = true;
        }
    }

    // multiple-scales style closed form: secular limit and amplitude law
    Expr amplitude_expr = nullptr;
    if (problem.amplitude) {
        if (!problem.secular) throw Error("run_case: amplitude requires a secular_limit step");
        Binding const_change;
        for (const auto& [k, v] : problem.amplitude->constant_change) const_change.bind(k, parse(v));
        amplitude_expr =
            amplitude_law(asym, problem.amplitude->constant, problem.amplitude->variable,
                          parse(problem.amplitude->change), problem.amplitude->output, const_change,
                          problem.secular->variable);
        report.amplitude = to_string(amplitude_expr);
        if (problem.expected_amplitude) {
            bool ok = expr_eq(amplitude_expr, parse(*problem.expected_amplitude));
            add_check(report.validation, "amplitude_matches", ok ? 1.0 : 0.0, 1.0, "==", ok);
            report.has_validation = true;
        }
    }

    // WKB phase recovery
    std::optional<WkbPhase> wkb_symbolic;
    if (problem.wkb) {
        wkb_symbolic = wkb_phase(sol, parse(problem.wkb->omega), problem.independent,
                                 problem.wkb->true_eps, problem.wkb->dependent);
        report.wkb_results.push_back({"mode_plus_relation", to_string(wkb_symbolic->relation_plus)});
        report.wkb_results.push_back({"mode_minus_relation", to_string(wkb_symbolic->relation_minus)});
        report.wkb_results.push_back({"solution_plus", to_string(*wkb_symbolic->solution_plus)});
        report.wkb_results.push_back({"solution_minus", to_string(*wkb_symbolic->solution_minus)});
    }

    // ---- numeric validation ------------------------------------------------

    if (problem.validation) {
        const ValidationDecl& vd = *problem.validation;
        report.has_validation = true;
        std::vector<double> ladder = options.eps_ladder.value_or(vd.eps_ladder);
        double tol = options.tolerance.value_or(vd.tolerance);
        const double t0 = vd.span.first, t1 = vd.span.second;
        std::vector<double> grid = make_grid(t0, t1, vd.grid_points);

        auto ic_value = [&](const std::string& name) {
            auto it = vd.initial_conditions.find(name);
            return it == vd.initial_conditions.end() ? 0.0 : it->second;
        };

        // reference trajectory at a given eps (and optional frequency binding)
        auto reference_at = [&](double eps_value,
                                const std::optional<std::string>& omega) -> Trajectory {
            Binding bind;
            bind.bind(problem.eps, numeric_constant(problem.eps == "eps2" ? eps_value * eps_value
                                                                           : eps_value));
            if (omega) bind.bind_function("Om", "x", parse(*omega));
            if (vd.reference.kind == "characteristic_roots") {
                NumericBinding env{{problem.eps, eps_value}};
                double a2 = eval_numeric(parse(vd.reference.a2), env).real();
                double a1 = eval_numeric(parse(vd.reference.a1), env).real();
                double a0 = eval_numeric(parse(vd.reference.a0), env).real();
                CharacteristicRootOracle oracle(a2, a1, a0, ic_value("y"), ic_value("y'"));
                return oracle.sample(vd.span, static_cast<std::size_t>(vd.grid_points));
            }
            Chart rchart{vd.reference.chart};
            std::vector<Expr> rhs;
            for (const auto& r : vd.reference.rhs) rhs.push_back(substitute(parse(r), bind));
            ODESystem rsys(rchart, rhs, vd.reference.chart.front());
            std::vector<double> init;
            for (const auto& c : vd.reference.chart)
                init.push_back(c == vd.reference.chart.front() ? t0 : ic_value(c));
            return integrate_reference(rsys, init, vd.span, tol);
        };

        double eps_min = ladder.back();
        for (double e : ladder) eps_min = std::min(eps_min, e);

        // declared-forms annihilation: validation ODE consistent with the case
        {
            std::optional<std::string> omega;
            if (!vd.wkb_instances.empty()) omega = vd.wkb_instances.front().omega;
            Trajectory traj = reference_at(eps_min, omega);
            Chart ach{vd.annihilation_chart.empty() ? vd.reference.chart : vd.annihilation_chart};
            Binding bind;
            bind.bind(problem.eps, numeric_constant(problem.eps == "eps2" ? eps_min * eps_min
                                                                           : eps_min));
            if (omega) bind.bind_function("Om", "x", parse(*omega));
            double worst = 0.0;
            for (std::size_t fi = 0; fi < vd.annihilation_forms.size(); ++fi) {
                KForm w = KForm::zero(ach, 1);
                for (const auto& [coord, text] : vd.annihilation_forms[fi])
                    w.set(ach.index(coord), substitute(parse(text), bind));
                double r = curve_annihilation(traj, w);
                report.validation.annihilation.push_back(
                    {"declared_form_" + std::to_string(fi + 1), r});
                worst = std::max(worst, r);
            }
            if (!vd.annihilation_forms.empty())
                add_check(report.validation, "declared_forms_annihilation", worst,
                          vd.annihilation_tol_factor * tol, "<=",
                          worst <= vd.annihilation_tol_factor * tol);

            // encoded system forms annihilate the same trajectory (non-stiff refs)
            if (vd.reference.kind == "rk45") {
                Chart rchart{vd.reference.chart};
                std::vector<Expr> rhs;
                for (const auto& r : vd.reference.rhs) rhs.push_back(substitute(parse(r), bind));
                ODESystem rsys(rchart, rhs, vd.reference.chart.front());
                double w2 = 0.0;
                auto encoded = ode_to_forms(rsys);
                for (std::size_t fi = 0; fi < encoded.size(); ++fi)
                    w2 = std::max(w2, curve_annihilation(traj, encoded[fi]));
                report.validation.annihilation.push_back({"ode_to_forms", w2});
                add_check(report.validation, "ode_forms_annihilation", w2,
                          vd.annihilation_tol_factor * tol, "<=",
                          w2 <= vd.annihilation_tol_factor * tol);
            }
        }

        // per-eps error series for the closed-form uniform solution
        if (solution_expr && problem.exp_relation && problem.linear_ode) {
            const std::string& indep = problem.linear_ode->independent;
            std::vector<std::pair<double, double>> errors;
            for (double eps_value : ladder) {
                Trajectory ref = reference_at(eps_value, std::nullopt);
                auto [A, B] = driver_detail::fit_two_constants(
                    solution_expr, indep, problem.exp_relation->new_constant,
                    problem.linear_ode->homogeneous_constant, t0, ic_value("y"), ic_value("y'"),
                    NumericBinding{{problem.eps, eps_value}});
                NumericBinding params{{problem.eps, eps_value},
                                      {problem.exp_relation->new_constant, A},
                                      {problem.linear_ode->homogeneous_constant, B}};
                auto samples = sample_asymptotic(solution_expr, grid, indep, params);
                double worst = 0.0;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    double yref = ref.value_at(grid[i])[1];
                    double err = std::abs(samples[i].real() - yref);
                    worst = std::max(worst, err);
                    report.validation.curve.push_back(
                        {problem.name, eps_value, grid[i], yref, samples[i].real(), err});
                }
                errors.push_back({eps_value, worst});
            }
            report.validation.eps_errors = errors;
            if (vd.monotone_errors) {
                bool mono = true;
                for (std::size_t i = 1; i < errors.size(); ++i)
                    if (!(errors[i].second < errors[i - 1].second)) mono = false;
                add_check(report.validation, "errors_decrease_with_eps",
                          errors.back().second, errors.front().second, "decreasing", mono);
            }
            if (vd.min_scaling_exponent) {
                double slope = error_scaling(errors);
                report.validation.scaling_exponent = slope;
                report.validation.has_scaling = true;
                add_check(report.validation, "scaling_exponent", slope, *vd.min_scaling_exponent,
                          ">=", slope >= *vd.min_scaling_exponent);
            }
        }

        // amplitude-law comparison against the reference envelope
        if (amplitude_expr && vd.amplitude) {
            const AmplitudeCheckDecl& ad = *vd.amplitude;
            Expr envelope = parse(ad.envelope);
            double y0 = ic_value("y"), z0 = ic_value("z");
            double r0 = std::sqrt(y0 * y0 + z0 * z0);
            std::vector<double> window_grid = make_grid(ad.window.first, ad.window.second,
                                                        vd.grid_points);
            std::vector<std::pair<double, double>> rel_errors;
            for (double eps_value : ladder) {
                Trajectory ref = reference_at(eps_value, std::nullopt);
                double worst = 0.0;
                for (double t : window_grid) {
                    std::vector<double> state = ref.value_at(t);
                    NumericBinding env;
                    for (std::size_t i = 0; i < vd.reference.chart.size(); ++i)
                        env[vd.reference.chart[i]] = state[i];
                    double r_num = eval_numeric(envelope, env).real();
                    NumericBinding law_env{{"R0", r0}, {problem.eps, eps_value}, {"t", t}};
                    double r_law = eval_numeric(amplitude_expr, law_env).real();
                    double rel = std::abs(r_num - r_law) / std::abs(r_law);
                    worst = std::max(worst, rel);
                    report.validation.curve.push_back(
                        {problem.name, eps_value, t, r_num, r_law, std::abs(r_num - r_law)});
                }
                rel_errors.push_back({eps_value, worst});
                if (std::abs(eps_value - ad.eps) < 1e-12)
                    add_check(report.validation, "amplitude_rel_error", worst, ad.rel_tol, "<=",
                              worst <= ad.rel_tol);
            }
            report.validation.eps_errors = rel_errors;
            report.validation.scaling_exponent = error_scaling(rel_errors);
            report.validation.has_scaling = true;
        }

        // WKB instances: reconstruct the real solution from the two modes
        if (wkb_symbolic && !vd.wkb_instances.empty() && problem.wkb) {
            const std::string trig_eps = problem.wkb->true_eps;
            for (const auto& inst : vd.wkb_instances) {
                WkbPhase phase = wkb_phase(sol, parse(inst.omega), problem.independent,
                                           trig_eps, problem.wkb->dependent);
                if (!phase.exact_phase)
                    throw Error("run_case: wkb instance frequency has no closed-form phase");
                report.wkb_results.push_back(
                    {"instance_" + inst.name + "_solution_plus", to_string(*phase.solution_plus)});
                Expr omega0 = parse(inst.omega);
                double om0 = eval_numeric(omega0, NumericBinding{{problem.independent, t0}}).real();
                double y0 = ic_value("y"), z0 = ic_value("z");
                std::vector<std::pair<double, double>> errors;
                for (double eps_value : ladder) {
                    Trajectory ref = reference_at(eps_value, inst.omega);
                    // match the complex modes to the real initial conditions
                    std::complex<double> cp(0.5 * y0, -0.5 * eps_value * z0 / om0);
                    std::complex<double> cm(0.5 * y0, 0.5 * eps_value * z0 / om0);
                    NumericBinding params{{trig_eps, eps_value}};
                    auto ep = sample_asymptotic(*phase.solution_plus, grid, problem.independent, params);
                    auto em = sample_asymptotic(*phase.solution_minus, grid, problem.independent, params);
                    double worst = 0.0;
                    for (std::size_t i = 0; i < grid.size(); ++i) {
                        std::complex<double> yw = cp * ep[i] + cm * em[i];
                        double yref = ref.value_at(grid[i])[1];
                        double err = std::abs(yw.real() - yref);
                        worst = std::max(worst, err);
                        report.validation.curve.push_back({problem.name + "/" + inst.name, eps_value,
                                                           grid[i], yref, yw.real(), err});
                    }
                    errors.push_back({eps_value, worst});
                    if (inst.exact_tol_factor)
                        add_check(report.validation,
                                  "wkb_" + inst.name + "_eps_" + format_double(eps_value), worst,
                                  *inst.exact_tol_factor * tol, "<=",
                                  worst <= *inst.exact_tol_factor * tol);
                }
                if (inst.require_decreasing) {
                    bool mono = true;
                    for (std::size_t i = 1; i < errors.size(); ++i)
                        if (!(errors[i].second < errors[i - 1].second)) mono = false;
                    add_check(report.validation, "wkb_" + inst.name + "_errors_decrease",
                              errors.back().second, errors.front().second, "decreasing", mono);
                }
                if (inst.require_decreasing) report.validation.eps_errors = errors;
            }
        }
    }

    report.passed = report.validation.all_passed();
    return report;
}

inline Report run_case_text(const std::string& json_text, const RunOptions& options = {}) {
    return run_case(ProblemFile::parse_text(json_text), options);
}

inline Report run_case_path(const std::string& path, const RunOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open problem file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return run_case_text(ss.str(), options);
}

// ---------------------------------------------------------------------------
// Built-in cases
// ---------------------------------------------------------------------------

inline const std::vector<std::pair<std::string, const char*>>& builtin_case_table() {
    static const std::vector<std::pair<std::string, const char*>> table{
        {"boundary_layer", builtin_cases::k_boundary_layer},
        {"nonlinear_damping", builtin_cases::k_nonlinear_damping},
        {"wkb", builtin_cases::k_wkb},
    };
    return table;
}

inline std::vector<std::string> builtin_names() {
    std::vector<std::string> names;
    for (const auto& [n, t] : builtin_case_table()) names.push_back(n);
    return names;
}

inline const char* builtin_case_text(const std::string& name) {
    for (const auto& [n, t] : builtin_case_table())
        if (n == name) return t;
    std::string msg = "unknown built-in case '" + name + "'; available:";
    for (const auto& n : builtin_names()) msg += " " + n;
    throw Error(msg);
}

inline Report run_builtin(const std::string& name, const RunOptions& options = {}) {
    return run_case_text(builtin_case_text(name), options);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Writes report.json, solution.txt, and (when error curves exist)
/// errors.csv into dir. Deterministic content.
inline std::vector<std::string> emit_report(const Report& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;
    {
        std::ofstream out(fs::path(dir) / "report.json", std::ios::binary);
        if (!out) throw Error("emit_report: cannot write report.json");
        out << report.to_json().dump(2) << "\n";
        written.push_back("report.json");
    }
    {
        std::ofstream out(fs::path(dir) / "solution.txt", std::ios::binary);
        if (!out) throw Error("emit_report: cannot write solution.txt");
        out << report.solution_text();
        written.push_back("solution.txt");
    }
    if (!report.validation.curve.empty()) {
        std::ofstream out(fs::path(dir) / "errors.csv", std::ios::binary);
        if (!out) throw Error("emit_report: cannot write errors.csv");
        out << error_curve_csv(report.validation.curve);
        written.push_back("errors.csv");
    }
    return written;
}

/// Structural + numeric problem-file validation (the `validate` subcommand):
/// declarations parse and resolve, and the validation ODE is consistent with
/// the declared forms at the smallest ladder eps.
inline std::vector<std::string> validate_problem(const ProblemFile& problem) {
    std::vector<std::string> notes;
    problem.check_declarations();
    notes.push_back("declarations: ok");
    PerturbedSystem sys = problem.make_system();
    notes.push_back("forms: " + std::to_string(sys.form_count()) + " pairs on chart dimension " +
                    std::to_string(sys.chart.dim()));
    if (problem.validation && !problem.validation->annihilation_forms.empty()) {
        ProblemFile probe = problem;
        Report r = run_case(probe, RunOptions{});
        for (const auto& c : r.validation.checks)
            if (c.name == "declared_forms_annihilation") {
                if (!c.passed)
                    throw Error("validation ODE inconsistent with declared forms (annihilation " +
                                format_double(c.value) + " > " + format_double(c.threshold) + ")");
                notes.push_back("declared forms annihilate the reference trajectory (max residual " +
                                format_double(c.value) + ")");
            }
    }
    return notes;
}

}  // namespace cartan
