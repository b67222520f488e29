#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cartan/homological.hpp"
#include "cartan/parser.hpp"
#include "cartan/printer.hpp"

namespace cartan {

using Json = nlohmann::ordered_json;

class ProblemFileError : public Error {
public:
    explicit ProblemFileError(const std::string& what) : Error("problem file: " + what) {}
};

namespace detail {

inline void expect_keys(const Json& j, const std::string& where, const std::set<std::string>& known) {
    if (!j.is_object()) throw ProblemFileError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ProblemFileError(where + ": unknown field '" + k + "'");
}

inline const Json& require(const Json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key)) throw ProblemFileError(where + ": missing field '" + key + "'");
    return j.at(key);
}

}  // namespace detail

/// One declared invariant to push: expr vanishes at zero order when the
/// tracked variable equals the constant.
struct InvariantDecl {
    std::string expr;
    std::string constant;
};

struct ExpRelationDecl {
    std::string constant;      // the resolved relation to exponentiate (by its constant)
    std::string new_constant;  // A with A = exp(constant/eps)
};

struct LinearOdeDecl {
    std::string dependent;             // y
    std::string independent;           // x
    std::string homogeneous_constant;  // B
};

struct SecularDecl {
    std::string variable;  // large-time variable
};

struct AmplitudeDecl {
    std::string constant;                          // u0
    std::string variable;                          // u
    std::string change;                            // "R^(-2)"
    std::string output;                            // R
    std::map<std::string, std::string> constant_change;  // u0 -> "1/R0^2"
};

struct WkbPhaseDecl {
    std::string omega;     // "Om(x)"
    std::string true_eps;  // eps with formal symbol = eps^2
    std::string dependent; // y
};

struct WkbInstanceDecl {
    std::string name;
    std::string omega;                      // concrete frequency, e.g. "1 + x"
    std::optional<double> exact_tol_factor; // error <= factor * tolerance
    bool require_decreasing = false;        // errors strictly decrease along the ladder
};

struct ReferenceDecl {
    std::string kind;  // "rk45" | "characteristic_roots"
    // characteristic_roots: a2 y'' + a1 y' + a0 y = 0 over the chart (x, y, z=y')
    std::string a2, a1, a0;
    // rk45
    std::vector<std::string> chart;
    std::vector<std::string> rhs;
};

struct AmplitudeCheckDecl {
    double eps = 0.0;
    std::pair<double, double> window{0.0, 0.0};
    double rel_tol = 0.0;
    std::string envelope;  // expression over the validation chart
};

struct ValidationDecl {
    ReferenceDecl reference;
    std::map<std::string, double> initial_conditions;
    std::pair<double, double> span{0.0, 1.0};
    double tolerance = 1e-10;
    int grid_points = 400;
    std::vector<double> eps_ladder{0.1, 0.05, 0.025};
    std::vector<std::string> annihilation_chart;
    std::vector<std::map<std::string, std::string>> annihilation_forms;
    std::optional<AmplitudeCheckDecl> amplitude;
    std::vector<WkbInstanceDecl> wkb_instances;
    bool monotone_errors = false;
    std::optional<double> min_scaling_exponent;
    double annihilation_tol_factor = 10.0;
    double residual_norm_max = 1e-9;
    std::optional<std::pair<int, int>> fit_constants_conditions;  // derivative orders fitted at span start
};

/// Declarative problem description (schema v1). Field-for-field JSON
/// mirror; unknown fields are rejected.
struct ProblemFile {
    int schema_version = 1;
    std::string name;
    std::vector<std::string> chart;
    std::string independent;
    std::string eps;
    std::vector<std::map<std::string, std::string>> zero_order_forms;
    std::vector<std::map<std::string, std::string>> perturbation_forms;

    std::vector<std::string> vf_terms;
    std::vector<std::string> mult_terms;
    std::vector<std::string> mask;
    int extend_depth = 0;

    std::vector<InvariantDecl> invariants;
    std::map<std::string, std::string> substitutions;

    std::optional<ExpRelationDecl> exp_relation;
    std::optional<LinearOdeDecl> linear_ode;
    std::optional<SecularDecl> secular;
    std::optional<AmplitudeDecl> amplitude;
    std::optional<WkbPhaseDecl> wkb;

    std::map<std::string, std::string> expected_generator;
    std::optional<std::string> expected_solution;
    std::optional<std::string> expected_amplitude;

    std::map<std::string, std::pair<double, double>> sampling_box;
    std::optional<ValidationDecl> validation;

    // ---- JSON round trip ----------------------------------------------------

    static ProblemFile from_json(const Json& j);
    Json to_json() const;
    static ProblemFile parse_text(const std::string& text) {
        Json j = Json::parse(text);
        return from_json(j);
    }

    // ---- semantic construction ----------------------------------------------

    Chart make_chart() const { return Chart(chart); }

    KForm make_form(const std::map<std::string, std::string>& coeffs) const {
        Chart ch = make_chart();
        KForm w = KForm::zero(ch, 1);
        for (const auto& [coord, text] : coeffs) w.set(ch.index(coord), parse(text));
        return w;
    }

    PerturbedSystem make_system() const {
        std::vector<KForm> w0, w1;
        for (const auto& f : zero_order_forms) w0.push_back(make_form(f));
        for (const auto& f : perturbation_forms) w1.push_back(make_form(f));
        return PerturbedSystem(make_chart(), independent, std::move(w0), std::move(w1), eps);
    }

    Ansatz make_ansatz() const {
        Ansatz a;
        for (const auto& t : vf_terms) a.vf_terms.push_back(parse(t));
        for (const auto& t : mult_terms) a.mult_terms.push_back(parse(t));
        Chart ch = make_chart();
        for (const auto& m : mask) a.mask.push_back(ch.index(m));
        return a;
    }

    Binding make_substitutions() const {
        Binding b;
        for (const auto& [k, v] : substitutions) b.bind(k, parse(v));
        return b;
    }

    SampleBox make_sampling_box() const {
        SampleBox box;
        for (const auto& [k, v] : sampling_box) box[k] = v;
        return box;
    }

    /// Structural validation: expressions parse, symbols are declared, list
    /// lengths agree. (The ODE/forms consistency check needs numerics and
    /// lives in the driver.)
    void check_declarations() const;
};

inline ProblemFile ProblemFile::from_json(const Json& j) {
    using detail::expect_keys;
    using detail::require;
    expect_keys(j, "top level",
                {"schema_version", "name", "chart", "independent", "eps", "zero_order_forms",
                 "perturbation_forms", "ansatz", "invariants", "substitutions", "pipeline",
                 "expected", "sampling_box", "validation"});
    ProblemFile p;
    p.schema_version = require(j, "top level", "schema_version").get<int>();
    if (p.schema_version != 1) throw ProblemFileError("unsupported schema_version");
    p.name = require(j, "top level", "name").get<std::string>();
    p.chart = require(j, "top level", "chart").get<std::vector<std::string>>();
    p.independent = require(j, "top level", "independent").get<std::string>();
    p.eps = require(j, "top level", "eps").get<std::string>();
    for (const auto& f : require(j, "top level", "zero_order_forms"))
        p.zero_order_forms.push_back(f.get<std::map<std::string, std::string>>());
    for (const auto& f : require(j, "top level", "perturbation_forms"))
        p.perturbation_forms.push_back(f.get<std::map<std::string, std::string>>());

    const Json& a = require(j, "top level", "ansatz");
    expect_keys(a, "ansatz", {"vector_field_terms", "multiplier_terms", "mask", "extend_depth"});
    p.vf_terms = require(a, "ansatz", "vector_field_terms").get<std::vector<std::string>>();
    p.mult_terms = require(a, "ansatz", "multiplier_terms").get<std::vector<std::string>>();
    p.mask = require(a, "ansatz", "mask").get<std::vector<std::string>>();
    p.extend_depth = a.value("extend_depth", 0);

    if (j.contains("invariants"))
        for (const auto& iv : j.at("invariants")) {
            expect_keys(iv, "invariant", {"expr", "constant"});
            p.invariants.push_back(
                {require(iv, "invariant", "expr").get<std::string>(),
                 require(iv, "invariant", "constant").get<std::string>()});
        }
    if (j.contains("substitutions"))
        p.substitutions = j.at("substitutions").get<std::map<std::string, std::string>>();

    if (j.contains("pipeline")) {
        const Json& pl = j.at("pipeline");
        expect_keys(pl, "pipeline",
                    {"exp_relation", "linear_ode", "secular_limit", "amplitude", "wkb_phase"});
        if (pl.contains("exp_relation")) {
            const Json& e = pl.at("exp_relation");
            expect_keys(e, "exp_relation", {"constant", "new_constant"});
            p.exp_relation = ExpRelationDecl{require(e, "exp_relation", "constant").get<std::string>(),
                                             require(e, "exp_relation", "new_constant").get<std::string>()};
        }
        if (pl.contains("linear_ode")) {
            const Json& e = pl.at("linear_ode");
            expect_keys(e, "linear_ode", {"dependent", "independent", "homogeneous_constant"});
            p.linear_ode = LinearOdeDecl{require(e, "linear_ode", "dependent").get<std::string>(),
                                         require(e, "linear_ode", "independent").get<std::string>(),
                                         e.value("homogeneous_constant", std::string("B"))};
        }
        if (pl.contains("secular_limit")) {
            const Json& e = pl.at("secular_limit");
            expect_keys(e, "secular_limit", {"variable"});
            p.secular = SecularDecl{require(e, "secular_limit", "variable").get<std::string>()};
        }
        if (pl.contains("amplitude")) {
            const Json& e = pl.at("amplitude");
            expect_keys(e, "amplitude", {"constant", "variable", "change", "output", "constant_change"});
            AmplitudeDecl d;
            d.constant = require(e, "amplitude", "constant").get<std::string>();
            d.variable = require(e, "amplitude", "variable").get<std::string>();
            d.change = require(e, "amplitude", "change").get<std::string>();
            d.output = require(e, "amplitude", "output").get<std::string>();
            d.constant_change =
                require(e, "amplitude", "constant_change").get<std::map<std::string, std::string>>();
            p.amplitude = std::move(d);
        }
        if (pl.contains("wkb_phase")) {
            const Json& e = pl.at("wkb_phase");
            expect_keys(e, "wkb_phase", {"omega", "true_eps", "dependent"});
            p.wkb = WkbPhaseDecl{require(e, "wkb_phase", "omega").get<std::string>(),
                                 require(e, "wkb_phase", "true_eps").get<std::string>(),
                                 require(e, "wkb_phase", "dependent").get<std::string>()};
        }
    }

    if (j.contains("expected")) {
        const Json& e = j.at("expected");
        expect_keys(e, "expected", {"generator", "solution", "amplitude"});
        if (e.contains("generator"))
            p.expected_generator = e.at("generator").get<std::map<std::string, std::string>>();
        if (e.contains("solution")) p.expected_solution = e.at("solution").get<std::string>();
        if (e.contains("amplitude")) p.expected_amplitude = e.at("amplitude").get<std::string>();
    }

    if (j.contains("sampling_box"))
        for (const auto& [k, v] : j.at("sampling_box").items()) {
            auto arr = v.get<std::vector<double>>();
            if (arr.size() != 2) throw ProblemFileError("sampling_box entries are [lo, hi]");
            p.sampling_box[k] = {arr[0], arr[1]};
        }

    if (j.contains("validation")) {
        const Json& v = j.at("validation");
        expect_keys(v, "validation",
                    {"reference", "initial_conditions", "span", "tolerance", "grid_points",
                     "eps_ladder", "annihilation_chart", "annihilation_forms", "amplitude",
                     "wkb_instances", "monotone_errors", "min_scaling_exponent",
                     "annihilation_tol_factor", "residual_norm_max", "fit_constants"});
        ValidationDecl d;
        const Json& r = require(v, "validation", "reference");
        expect_keys(r, "reference", {"kind", "a2", "a1", "a0", "chart", "rhs"});
        d.reference.kind = require(r, "reference", "kind").get<std::string>();
        if (d.reference.kind == "characteristic_roots") {
            d.reference.a2 = require(r, "reference", "a2").get<std::string>();
            d.reference.a1 = require(r, "reference", "a1").get<std::string>();
            d.reference.a0 = require(r, "reference", "a0").get<std::string>();
        } else if (d.reference.kind == "rk45") {
            d.reference.chart = require(r, "reference", "chart").get<std::vector<std::string>>();
            d.reference.rhs = require(r, "reference", "rhs").get<std::vector<std::string>>();
        } else {
            throw ProblemFileError("reference.kind must be rk45 or characteristic_roots");
        }
        d.initial_conditions =
            require(v, "validation", "initial_conditions").get<std::map<std::string, double>>();
        auto span = require(v, "validation", "span").get<std::vector<double>>();
        if (span.size() != 2) throw ProblemFileError("span must be [start, end]");
        d.span = {span[0], span[1]};
        d.tolerance = v.value("tolerance", 1e-10);
        d.grid_points = v.value("grid_points", 400);
        if (v.contains("eps_ladder")) d.eps_ladder = v.at("eps_ladder").get<std::vector<double>>();
        if (v.contains("annihilation_chart"))
            d.annihilation_chart = v.at("annihilation_chart").get<std::vector<std::string>>();
        if (v.contains("annihilation_forms"))
            for (const auto& f : v.at("annihilation_forms"))
                d.annihilation_forms.push_back(f.get<std::map<std::string, std::string>>());
        if (v.contains("amplitude")) {
            const Json& amp = v.at("amplitude");
            expect_keys(amp, "validation.amplitude", {"eps", "window", "rel_tol", "envelope"});
            AmplitudeCheckDecl ad;
            ad.eps = require(amp, "amplitude", "eps").get<double>();
            auto w = require(amp, "amplitude", "window").get<std::vector<double>>();
            if (w.size() != 2) throw ProblemFileError("amplitude.window must be [t0, t1]");
            ad.window = {w[0], w[1]};
            ad.rel_tol = require(amp, "amplitude", "rel_tol").get<double>();
            ad.envelope = require(amp, "amplitude", "envelope").get<std::string>();
            d.amplitude = std::move(ad);
        }
        if (v.contains("wkb_instances"))
            for (const auto& wi : v.at("wkb_instances")) {
                expect_keys(wi, "wkb_instance",
                            {"name", "omega", "exact_tol_factor", "require_decreasing"});
                WkbInstanceDecl wd;
                wd.name = require(wi, "wkb_instance", "name").get<std::string>();
                wd.omega = require(wi, "wkb_instance", "omega").get<std::string>();
                if (wi.contains("exact_tol_factor"))
                    wd.exact_tol_factor = wi.at("exact_tol_factor").get<double>();
                wd.require_decreasing = wi.value("require_decreasing", false);
                d.wkb_instances.push_back(std::move(wd));
            }
        d.monotone_errors = v.value("monotone_errors", false);
        if (v.contains("min_scaling_exponent"))
            d.min_scaling_exponent = v.at("min_scaling_exponent").get<double>();
        d.annihilation_tol_factor = v.value("annihilation_tol_factor", 10.0);
        d.residual_norm_max = v.value("residual_norm_max", 1e-9);
        if (v.contains("fit_constants")) {
            auto fc = v.at("fit_constants").get<std::vector<int>>();
            if (fc.size() != 2) throw ProblemFileError("fit_constants must be [order0, order1]");
            d.fit_constants_conditions = {fc[0], fc[1]};
        }
        p.validation = std::move(d);
    }
    return p;
}

inline Json ProblemFile::to_json() const {
    Json j;
    j["schema_version"] = schema_version;
    j["name"] = name;
    j["chart"] = chart;
    j["independent"] = independent;
    j["eps"] = eps;
    j["zero_order_forms"] = zero_order_forms;
    j["perturbation_forms"] = perturbation_forms;
    j["ansatz"] = Json{{"vector_field_terms", vf_terms},
                       {"multiplier_terms", mult_terms},
                       {"mask", mask},
                       {"extend_depth", extend_depth}};
    Json inv = Json::array();
    for (const auto& i : invariants) inv.push_back({{"expr", i.expr}, {"constant", i.constant}});
    j["invariants"] = inv;
    j["substitutions"] = substitutions;

    Json pl = Json::object();
    if (exp_relation)
        pl["exp_relation"] = {{"constant", exp_relation->constant},
                              {"new_constant", exp_relation->new_constant}};
    if (linear_ode)
        pl["linear_ode"] = {{"dependent", linear_ode->dependent},
                            {"independent", linear_ode->independent},
                            {"homogeneous_constant", linear_ode->homogeneous_constant}};
    if (secular) pl["secular_limit"] = {{"variable", secular->variable}};
    if (amplitude)
        pl["amplitude"] = {{"constant", amplitude->constant},
                           {"variable", amplitude->variable},
                           {"change", amplitude->change},
                           {"output", amplitude->output},
                           {"constant_change", amplitude->constant_change}};
    if (wkb)
        pl["wkb_phase"] = {
            {"omega", wkb->omega}, {"true_eps", wkb->true_eps}, {"dependent", wkb->dependent}};
    j["pipeline"] = pl;

    Json ex = Json::object();
    if (!expected_generator.empty()) ex["generator"] = expected_generator;
    if (expected_solution) ex["solution"] = *expected_solution;
    if (expected_amplitude) ex["amplitude"] = *expected_amplitude;
    j["expected"] = ex;

    Json box = Json::object();
    for (const auto& [k, v] : sampling_box) box[k] = std::vector<double>{v.first, v.second};
    j["sampling_box"] = box;

    if (validation) {
        Json v;
        if (validation->reference.kind == "characteristic_roots") {
            v["reference"] = {{"kind", "characteristic_roots"},
                              {"a2", validation->reference.a2},
                              {"a1", validation->reference.a1},
                              {"a0", validation->reference.a0}};
        } else {
            v["reference"] = {{"kind", "rk45"},
                              {"chart", validation->reference.chart},
                              {"rhs", validation->reference.rhs}};
        }
        v["initial_conditions"] = validation->initial_conditions;
        v["span"] = std::vector<double>{validation->span.first, validation->span.second};
        v["tolerance"] = validation->tolerance;
        v["grid_points"] = validation->grid_points;
        v["eps_ladder"] = validation->eps_ladder;
        if (!validation->annihilation_chart.empty())
            v["annihilation_chart"] = validation->annihilation_chart;
        if (!validation->annihilation_forms.empty())
            v["annihilation_forms"] = validation->annihilation_forms;
        if (validation->amplitude)
            v["amplitude"] = {{"eps", validation->amplitude->eps},
                              {"window", std::vector<double>{validation->amplitude->window.first,
                                                             validation->amplitude->window.second}},
                              {"rel_tol", validation->amplitude->rel_tol},
                              {"envelope", validation->amplitude->envelope}};
        if (!validation->wkb_instances.empty()) {
            Json arr = Json::array();
            for (const auto& wi : validation->wkb_instances) {
                Json o = {{"name", wi.name}, {"omega", wi.omega}};
                if (wi.exact_tol_factor) o["exact_tol_factor"] = *wi.exact_tol_factor;
                if (wi.require_decreasing) o["require_decreasing"] = true;
                arr.push_back(o);
            }
            v["wkb_instances"] = arr;
        }
        if (validation->monotone_errors) v["monotone_errors"] = true;
        if (validation->min_scaling_exponent)
            v["min_scaling_exponent"] = *validation->min_scaling_exponent;
        v["annihilation_tol_factor"] = validation->annihilation_tol_factor;
        v["residual_norm_max"] = validation->residual_norm_max;
        if (validation->fit_constants_conditions)
            v["fit_constants"] = std::vector<int>{validation->fit_constants_conditions->first,
                                                  validation->fit_constants_conditions->second};
        j["validation"] = v;
    }
    return j;
}

inline void ProblemFile::check_declarations() const {
    Chart ch = make_chart();
    if (zero_order_forms.size() != perturbation_forms.size())
        throw ProblemFileError("zero_order_forms and perturbation_forms must have equal length");
    ch.index(independent);

    std::set<std::string> declared(chart.begin(), chart.end());
    declared.insert(eps);
    for (const auto& iv : invariants) declared.insert(iv.constant);
    for (const auto& [k, v] : substitutions) {
        (void)v;
        declared.insert(k);
    }

    auto check_expr = [&](const std::string& text, const std::string& where,
                          bool allow_placeholders) {
        Expr e;
        try {
            e = parse(text);
        } catch (const ParseError& err) {
            throw ProblemFileError(where + ": " + err.what());
        }
        for (const auto& atom : free_atoms(e)) {
            if (declared.count(atom)) continue;
            bool placeholder = atom.find('\'') != std::string::npos ||
                               (!atom.empty() && std::isupper(static_cast<unsigned char>(atom[0])));
            if (allow_placeholders && placeholder) continue;
            throw ProblemFileError(where + ": undeclared symbol '" + atom + "'");
        }
    };

    for (const auto& f : zero_order_forms)
        for (const auto& [coord, text] : f) {
            ch.index(coord);
            check_expr(text, "zero-order form coefficient", true);
        }
    for (const auto& f : perturbation_forms)
        for (const auto& [coord, text] : f) {
            ch.index(coord);
            check_expr(text, "perturbation form coefficient", true);
        }
    for (const auto& t : vf_terms) check_expr(t, "vector-field ansatz term", true);
    for (const auto& t : mult_terms) check_expr(t, "multiplier ansatz term", true);
    for (const auto& m : mask) ch.index(m);
    for (const auto& iv : invariants) check_expr(iv.expr, "invariant", false);
}

}  // namespace cartan
