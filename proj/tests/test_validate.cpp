#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cartan/parser.hpp"
#include "cartan/validate.hpp"

using namespace cartan;

namespace {

ODESystem harmonic() {
    Chart ch{std::vector<std::string>{"t", "y", "z"}};
    return ODESystem(ch, {parse("1"), parse("z"), parse("-y")}, "t");
}

}  // namespace

TEST_CASE("reference integrator conserves the oscillator energy") {
    Trajectory traj = integrate_reference(harmonic(), {0.0, 1.0, 0.0}, {0.0, 100.0}, 1e-10);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.ts.size(); ++i) {
        double y = traj.states[i][1], z = traj.states[i][2];
        worst = std::max(worst, std::abs(y * y + z * z - 1.0));
    }
    CHECK(worst < 1e-8);
    CHECK(traj.method == "dormand-prince-5(4)");
    CHECK(traj.steps > 0);
}

TEST_CASE("reference integrator matches cos t") {
    Trajectory traj = integrate_reference(harmonic(), {0.0, 1.0, 0.0}, {0.0, 10.0}, 1e-10);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.ts.size(); ++i)
        worst = std::max(worst, std::abs(traj.states[i][1] - std::cos(traj.ts[i])));
    CHECK(worst < 1e-7);

    // dense output stays accurate between accepted steps
    for (double t = 0.05; t < 10.0; t += 0.37) {
        std::vector<double> v = traj.value_at(t);
        CHECK(std::abs(v[1] - std::cos(t)) < 1e-6);
    }
}

TEST_CASE("zero right-hand side gives a constant trajectory") {
    Chart ch{std::vector<std::string>{"t", "y"}};
    ODESystem sys(ch, {parse("1"), parse("0")}, "t");
    Trajectory traj = integrate_reference(sys, {0.0, 3.5}, {0.0, 1.0}, 1e-10);
    for (const auto& s : traj.states) CHECK(std::abs(s[1] - 3.5) < 1e-12);
}

TEST_CASE("blow-up triggers the stiffness error with an oracle hint") {
    Chart ch{std::vector<std::string>{"t", "y"}};
    ODESystem sys(ch, {parse("1"), parse("y^2")}, "t");
    try {
        integrate_reference(sys, {0.0, 1.0}, {0.0, 2.0}, 1e-10);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(std::string(e.what()).find("characteristic-root") != std::string::npos);
    }
}

TEST_CASE("characteristic-root oracle matches the spec roots at eps = 0.1") {
    CharacteristicRootOracle oracle(0.1, 1.0, 1.0, 0.0, 1.0);
    CHECK(std::abs(oracle.r1 - (-1.1270166537925831)) < 1e-12);
    CHECK(std::abs(oracle.r2 - (-8.872983346207417)) < 1e-12);
    // boundary conditions y(0) = 0, y'(0) = 1
    CHECK(std::abs(oracle.y(0.0)) < 1e-14);
    CHECK(std::abs(oracle.yp(0.0) - 1.0) < 1e-14);
}

TEST_CASE("curve annihilation") {
    Trajectory traj = integrate_reference(harmonic(), {0.0, 1.0, 0.0}, {0.0, 10.0}, 1e-10);
    Chart ch = harmonic().chart;
    KForm good = KForm::one_form(ch, {parse("-z"), parse("1"), parse("0")});  // dy - z dt
    KForm bad = KForm::one_form(ch, {parse("z"), parse("1"), parse("0")});    // dy + z dt
    CHECK(curve_annihilation(traj, good) < 1e-8);
    CHECK(curve_annihilation(traj, bad) > 0.5);

    // boundary-layer oracle vs the combined form dy + y dx + eps dz
    double eps = 0.1;
    CharacteristicRootOracle oracle(eps, 1.0, 1.0, 0.0, 1.0);
    Trajectory bl = oracle.sample({0.0, 1.0}, 400);
    Chart xyz{std::vector<std::string>{"x", "y", "z"}};
    Binding bind_eps;
    bind_eps.bind("eps", parse("1/10"));
    KForm w2 = KForm::one_form(xyz, {parse("y"), parse("1"), substitute(parse("eps"), bind_eps)});
    CHECK(curve_annihilation(bl, w2) < 1e-8);
}

TEST_CASE("error_scaling recovers planted exponents") {
    std::vector<std::pair<double, double>> linear, quadratic;
    for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
        linear.push_back({eps, 3.0 * eps});
        quadratic.push_back({eps, 0.7 * eps * eps});
    }
    CHECK(std::abs(error_scaling(linear) - 1.0) < 0.01);
    CHECK(std::abs(error_scaling(quadratic) - 2.0) < 0.01);

    CHECK_THROWS_AS(error_scaling({{0.1, 1.0}, {0.05, 0.5}}), Error);          // too few
    CHECK_THROWS_AS(error_scaling({{0.1, 1.0}, {0.05, 0.0}, {0.025, 1.0}}), Error);  // degenerate
}

TEST_CASE("sample_asymptotic") {
    std::vector<double> grid{0.0, 0.5, 1.0};
    auto constant_samples = sample_asymptotic(parse("7/2"), grid, "x", {});
    for (const auto& v : constant_samples) {
        CHECK(v.real() == 3.5);
        CHECK(v.imag() == 0.0);
    }

    NumericBinding params{{"R0", 2.0}, {"eps", 0.05}};
    auto law = sample_asymptotic(parse("R0/sqrt(1 + 3/4*R0^2*eps*t)"), {0.0}, "t", params);
    CHECK(std::abs(law[0].real() - 2.0) < 1e-14);

    NumericBinding p2{{"A", 1.0}, {"B", -1.0}, {"eps", 0.1}};
    auto curve = sample_asymptotic(parse("A*exp(-x/eps) + B*exp(-x)"), grid, "x", p2);
    CHECK(std::abs(curve[0].real() - 0.0) < 1e-14);
}

TEST_CASE("error curve CSV layout") {
    std::vector<ErrorCurvePoint> rows{{"case_a", 0.1, 0.5, 1.0, 1.1, 0.1}};
    std::string csv = error_curve_csv(rows);
    CHECK(csv.find("case,epsilon,x_or_t,reference,asymptotic,abs_error\n") == 0);
    CHECK(csv.find("case_a,0.1") != std::string::npos);
}
