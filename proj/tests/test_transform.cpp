#include <catch2/catch_amalgamated.hpp>

#include "cartan/parser.hpp"
#include "cartan/printer.hpp"
#include "cartan/transform.hpp"

using namespace cartan;

namespace {

PerturbedSystem boundary_layer_system() {
    Chart ch{std::vector<std::string>{"x", "y", "z"}};
    std::vector<KForm> w0{KForm::one_form(ch, {parse("-z"), parse("1"), parse("0")}),
                          KForm::one_form(ch, {parse("y"), parse("1"), parse("0")})};
    std::vector<KForm> w1{KForm::zero(ch, 1),
                          KForm::one_form(ch, {parse("0"), parse("0"), parse("-1")})};
    return PerturbedSystem(ch, "x", std::move(w0), std::move(w1), "eps");
}

HomologicalSolution boundary_layer_solution() {
    Ansatz a;
    a.vf_terms = {parse("ln(y+z)"), parse("y*ln(y+z)"), parse("z"), parse("y")};
    a.mult_terms = {parse("1"), parse("ln(y+z)"), parse("y/(y+z)"), parse("y*ln(y+z)/(y+z)")};
    a.mask = {0, 1};
    return solve(boundary_layer_system(), a);
}

PerturbedSystem damping_system() {
    Chart ch{std::vector<std::string>{"t", "u", "th"}};
    std::vector<KForm> w0{KForm::one_form(ch, {parse("0"), parse("1"), parse("0")}),
                          KForm::one_form(ch, {parse("0"), parse("0"), parse("u")})};
    std::vector<KForm> w1{
        KForm::one_form(ch, {parse("3/4 - cos(2*(t+th)) + 1/4*cos(4*(t+th))"), parse("0"), parse("0")}),
        KForm::one_form(ch, {parse("1/4*sin(2*(t+th)) - 1/8*sin(4*(t+th))"), parse("0"), parse("0")})};
    return PerturbedSystem(ch, "t", std::move(w0), std::move(w1), "eps");
}

HomologicalSolution damping_solution() {
    Ansatz seed;
    seed.vf_terms = {parse("cos(2*(t+th))"), parse("cos(4*(t+th))"), parse("cos(2*(t+th))/u"),
                     parse("cos(4*(t+th))/u")};
    seed.mult_terms = {parse("1/u")};
    seed.mask = {1, 2};
    PerturbedSystem sys = damping_system();
    return solve(sys, extend_ansatz(seed, sys, 2));
}

}  // namespace

TEST_CASE("push_function") {
    HomologicalSolution sol = boundary_layer_solution();
    Expr pushed = push_function(sol.X, "eps", parse("x - x0"));
    CHECK(expr_eq(pushed, parse("x - x0 + eps*ln(y+z)")));

    // X = 0 leaves functions unchanged
    VectorField zero = VectorField::zero(sol.system.chart);
    CHECK(expr_eq(push_function(zero, "eps", parse("x - x0")), parse("x - x0")));

    // eps = 0 recovers the input
    Binding eps0;
    eps0.bind("eps", parse("0"));
    CHECK(expr_eq(substitute(pushed, eps0), parse("x - x0")));

    // linearity over constant combinations
    Expr f = parse("x - x0"), g = parse("y - y0");
    Expr lhs = push_function(sol.X, "eps", parse("3*(x - x0) + 2*(y - y0)"));
    Expr rhs = add(mul(parse("3"), push_function(sol.X, "eps", f)),
                   mul(parse("2"), push_function(sol.X, "eps", g)));
    CHECK(expr_eq(lhs, rhs));
}

TEST_CASE("transform_invariant: boundary layer produces the log relation") {
    HomologicalSolution sol = boundary_layer_solution();
    Binding subst;
    subst.bind("z", parse("y'"));
    AsymptoticSolution asym =
        transform_invariant(sol, "eps", {{parse("x - x0"), "x0"}}, subst);
    REQUIRE(asym.relations.size() == 1);
    const Relation& rel = asym.relations[0];
    REQUIRE(rel.solved.has_value());
    CHECK(expr_eq(*rel.solved, parse("x + eps*ln(y + y')")));

    // at eps = 0 the relation reduces to its zero-order counterpart
    Binding eps0;
    eps0.bind("eps", parse("0"));
    CHECK(expr_eq(substitute(*rel.solved, eps0), parse("x")));

    // exponentiation with A = exp(x0/eps) gives y + y' = A exp(-x/eps)
    auto [lhs, rhs] = exponentiate_log_relation(rel, "eps", "A");
    CHECK(expr_eq(lhs, parse("y + y'")));
    CHECK(expr_eq(rhs, parse("A*exp(-x/eps)")));
}

TEST_CASE("transform_invariant: multiple scales reproduces both relations") {
    HomologicalSolution sol = damping_solution();
    AsymptoticSolution asym = transform_invariant(
        sol, "eps", {{parse("u - u0"), "u0"}, {parse("th - th0"), "th0"}});
    REQUIRE(asym.relations.size() == 2);

    REQUIRE(asym.relations[0].solved.has_value());
    CHECK(expr_eq(*asym.relations[0].solved,
                  parse("u - eps*(3/4*t - 1/2*sin(2*(t+th)) + 1/16*sin(4*(t+th)))")));

    // the th-relation replaces 1/u by 1/u0 inside the O(eps) term
    REQUIRE(asym.relations[1].solved.has_value());
    CHECK(expr_eq(*asym.relations[1].solved,
                  parse("th + eps*(1/u0)*(1/8*cos(2*(t+th)) - 1/32*cos(4*(t+th)))")));
}

TEST_CASE("transform_invariant rejects non-invariants") {
    HomologicalSolution sol = boundary_layer_solution();
    // z is not constant on zero-order curves (dz is not in span{omega0})
    CHECK_THROWS_AS(transform_invariant(sol, "eps", {{parse("z - z0"), "z0"}}), Error);
}

TEST_CASE("secular_limit") {
    Expr e = parse("u0 + eps*(3/4*t - 1/2*sin(2*(t+th)) + 1/16*sin(4*(t+th)))");
    CHECK(expr_eq(secular_limit(e, "t"), parse("u0 + 3/4*eps*t")));
    CHECK(expr_eq(secular_limit(parse("5 + t^2"), "t"), parse("5 + t^2")));
    CHECK(expr_eq(secular_limit(parse("sin(th0)"), "t"), parse("sin(th0)")));

    // idempotent, and the polynomial part is untouched
    Expr once = secular_limit(e, "t");
    CHECK(expr_eq(secular_limit(once, "t"), once));
}

TEST_CASE("solve_linear_first_order") {
    // y' + y = A e^{-x/eps}  ->  Abar e^{-x/eps} + B e^{-x},  Abar = A eps/(eps-1)
    Expr sol = solve_linear_first_order(parse("1"), parse("A*exp(-x/eps)"), "x", "B");
    CHECK(expr_eq(sol, parse("A*eps/(eps-1)*exp(-x/eps) + B*exp(-x)")));

    CHECK(expr_eq(solve_linear_first_order(parse("1"), parse("0"), "x", "B"), parse("B*exp(-x)")));
    CHECK(expr_eq(solve_linear_first_order(parse("2"), parse("exp(x)"), "x", "B"),
                  parse("exp(x)/3 + B*exp(-2*x)")));

    CHECK_THROWS_AS(solve_linear_first_order(parse("1"), parse("exp(-x)"), "x", "B"), ResonanceError);

    // substituting the general solution back yields an identity
    Expr coeff = parse("2"), forcing = parse("3*exp(x) + 5");
    Expr y = solve_linear_first_order(coeff, forcing, "x", "B");
    Expr residual = sub(add(differentiate(y, "x"), mul(coeff, y)), forcing);
    CHECK(is_zero(residual));
}

TEST_CASE("amplitude_law") {
    HomologicalSolution sol = damping_solution();
    AsymptoticSolution asym = transform_invariant(
        sol, "eps", {{parse("u - u0"), "u0"}, {parse("th - th0"), "th0"}});

    Binding const_change;
    const_change.bind("u0", parse("1/R0^2"));
    Expr law = amplitude_law(asym, "u0", "u", parse("R^(-2)"), "R", const_change, "t");
    CHECK(expr_eq(law, parse("R0/sqrt(1 + 3/4*R0^2*eps*t)")));

    // eps = 0 and t = 0 both collapse to R0
    Binding eps0;
    eps0.bind("eps", parse("0"));
    CHECK(expr_eq(substitute(law, eps0), parse("R0")));
    Binding t0;
    t0.bind("t", parse("0"));
    CHECK(expr_eq(substitute(law, t0), parse("R0")));
}

TEST_CASE("wkb_phase") {
    // constant frequency: y = exp(+- i x / eps)
    HomologicalSolution* unused = nullptr;
    (void)unused;
    Chart ch{std::vector<std::string>{"x", "u", "v"}};
    std::vector<KForm> w0{KForm::one_form(ch, {parse("1"), parse("0"), parse("0")}),
                          KForm::one_form(ch, {parse("0"), parse("1"), parse("0")})};
    std::vector<KForm> w1{
        KForm::one_form(ch, {parse("0"), parse("0"), parse("-1/(2*Om(x)^2*sqrt(u)*sqrt(v))")}),
        KForm::one_form(ch, {parse("0"), parse("0"), parse("-1/Om(x)^2")})};
    PerturbedSystem sys(ch, "x", w0, w1, "eps2");
    Ansatz a;
    a.vf_terms = {parse("sqrt(v/u)/Om(x)^2"), parse("v/Om(x)^2")};
    a.mult_terms = {parse("1"), parse("Om'(x)*sqrt(v/u)/Om(x)^3"), parse("sqrt(v)/(sqrt(u)^3*Om(x)^2)"),
                    parse("Om'(x)*v/Om(x)^3")};
    a.mask = {0, 1};
    HomologicalSolution sol = solve(sys, a);

    WkbPhase constant_freq = wkb_phase(sol, parse("1"), "x", "eps", "y");
    CHECK(expr_eq(constant_freq.relation_plus, parse("y' - i/eps*y")));
    REQUIRE(constant_freq.solution_plus.has_value());
    CHECK(expr_eq(*constant_freq.solution_plus, parse("exp(i*x/eps)")));
    CHECK(expr_eq(*constant_freq.solution_minus, parse("exp(-i*x/eps)")));
    CHECK(constant_freq.exact_phase);

    WkbPhase linear_freq = wkb_phase(sol, parse("1 + x"), "x", "eps", "y");
    CHECK(expr_eq(*linear_freq.solution_plus, parse("exp(i/eps*(x + x^2/2))")));
    CHECK(linear_freq.exact_phase);

    // opaque frequency: unevaluated phase placeholder Phi with Phi' = Omega
    WkbPhase opaque = wkb_phase(sol, parse("Om(x)"), "x", "eps", "y");
    CHECK_FALSE(opaque.exact_phase);
    CHECK(expr_eq(opaque.phase, parse("Phi(x)")));
    CHECK(expr_eq(*opaque.solution_plus, parse("exp(i*Phi(x)/eps)")));
    CHECK(expr_eq(opaque.relation_plus, parse("y' - i/eps*Om(x)*y")));
}
