#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cartan/forms.hpp"

namespace cartan {

class IntegrationError : public Error {
public:
    explicit IntegrationError(const std::string& what) : Error(what) {}
};

/// Sampled solution curve with integration metadata. Samples are kept dense
/// (max_step-bounded) so that the cubic Hermite interpolant stays within the
/// integration tolerance.
struct Trajectory {
    std::vector<double> ts;
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> derivs;

    std::string method;
    double tol = 0.0;
    std::size_t steps = 0;
    double max_step = 0.0;

    std::size_t dim() const { return states.empty() ? 0 : states.front().size(); }

    /// Cubic Hermite interpolation between stored samples.
    std::vector<double> value_at(double t) const {
        if (ts.empty()) throw IntegrationError("empty trajectory");
        if (t <= ts.front()) return states.front();
        if (t >= ts.back()) return states.back();
        std::size_t hi = std::upper_bound(ts.begin(), ts.end(), t) - ts.begin();
        std::size_t lo = hi - 1;
        double h = ts[hi] - ts[lo];
        double s = (t - ts[lo]) / h;
        double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        double h10 = s * (1 - s) * (1 - s);
        double h01 = s * s * (3 - 2 * s);
        double h11 = s * s * (s - 1);
        std::vector<double> out(dim());
        for (std::size_t k = 0; k < dim(); ++k)
            out[k] = h00 * states[lo][k] + h10 * h * derivs[lo][k] + h01 * states[hi][k] +
                     h11 * h * derivs[hi][k];
        return out;
    }
};

namespace detail {

/// Numeric right-hand side compiled from an ODESystem by expression
/// evaluation over the chart bindings.
inline std::function<void(double, const std::vector<double>&, std::vector<double>&)> compile_rhs(
    const ODESystem& sys) {
    return [&sys](double, const std::vector<double>& x, std::vector<double>& dx) {
        NumericBinding env;
        for (std::size_t i = 0; i < sys.chart.dim(); ++i) env[sys.chart.name(i)] = x[i];
        for (std::size_t i = 0; i < sys.chart.dim(); ++i) {
            std::complex<double> v = eval_numeric(sys.rhs[i], env);
            dx[i] = v.real();
        }
    };
}

}  // namespace detail

/// Adaptive embedded Dormand-Prince 5(4) pair with local error control and
/// dense (max_step-bounded) output. Steps land exactly on span end.
/// Throws on step-size underflow with a pointer to the closed-form oracle
/// used for the stiff boundary-layer case.
inline Trajectory integrate_reference(const ODESystem& sys, const std::vector<double>& initial,
                                      std::pair<double, double> span, double tol,
                                      double max_step = 0.0) {
    if (initial.size() != sys.chart.dim()) throw IntegrationError("initial state size mismatch");
    if (tol < 1e-13) throw IntegrationError("tolerance below 1e-13 is not supported");
    const double t0 = span.first, t1 = span.second;
    if (!(t1 > t0)) throw IntegrationError("empty integration span");
    if (max_step <= 0.0) max_step = (t1 - t0) / 400.0;

    auto f = detail::compile_rhs(sys);
    const std::size_t n = sys.chart.dim();

    // Dormand-Prince coefficients
    static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
    static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                        e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    Trajectory traj;
    traj.method = "dormand-prince-5(4)";
    traj.tol = tol;
    traj.max_step = max_step;

    std::vector<double> x = initial, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), xt(n), x5(n);
    double t = t0;
    f(t, x, k1);
    traj.ts.push_back(t);
    traj.states.push_back(x);
    traj.derivs.push_back(k1);

    double h = std::min(max_step, (t1 - t0) / 100.0);
    const double hmin = (t1 - t0) * 1e-14;
    std::size_t rejected_in_row = 0;

    while (t < t1) {
        h = std::min({h, max_step, t1 - t});
        if (h < hmin)
            throw IntegrationError(
                "step-size underflow (stiff problem); use the closed-form characteristic-root "
                "oracle for stiff references");

        auto stage = [&](std::vector<double>& out, std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = x[i];
                for (const auto& [w, k] : terms) acc += h * w * (*k)[i];
                out[i] = acc;
            }
        };

        stage(xt, {{a21, &k1}});
        f(t + c2 * h, xt, k2);
        stage(xt, {{a31, &k1}, {a32, &k2}});
        f(t + c3 * h, xt, k3);
        stage(xt, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
        f(t + c4 * h, xt, k4);
        stage(xt, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        f(t + c5 * h, xt, k5);
        stage(xt, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        f(t + h, xt, k6);
        stage(x5, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        f(t + h, x5, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            double scale = 1.0 + std::max(std::abs(x[i]), std::abs(x5[i]));
            err = std::max(err, std::abs(ei) / scale);
        }

        if (err <= tol) {
            t += h;
            x = x5;
            k1 = k7;  // FSAL
            traj.ts.push_back(t);
            traj.states.push_back(x);
            traj.derivs.push_back(k1);
            ++traj.steps;
            rejected_in_row = 0;
        } else if (++rejected_in_row > 60) {
            throw IntegrationError("step-size control failed to converge");
        }
        double factor = 0.9 * std::pow(tol / std::max(err, 1e-300), 0.2);
        h *= std::clamp(factor, 0.2, 5.0);
    }
    return traj;
}

/// Closed-form oracle for a2 y'' + a1 y' + a0 y = 0 with real distinct
/// characteristic roots; used instead of a stiff integrator for the
/// boundary-layer reference.
struct CharacteristicRootOracle {
    double r1 = 0.0, r2 = 0.0;  // roots, |r1| <= |r2|
    double c1 = 0.0, c2 = 0.0;

    CharacteristicRootOracle(double a2, double a1, double a0, double y0, double yp0) {
        double disc = a1 * a1 - 4.0 * a2 * a0;
        if (a2 == 0.0 || disc <= 0.0)
            throw Error("CharacteristicRootOracle: roots are not real and distinct");
        double s = std::sqrt(disc);
        r1 = (-a1 + s) / (2.0 * a2);
        r2 = (-a1 - s) / (2.0 * a2);
        // solve c1 + c2 = y0, r1 c1 + r2 c2 = yp0
        double det = r2 - r1;
        c1 = (r2 * y0 - yp0) / det;
        c2 = (yp0 - r1 * y0) / det;
    }

    double y(double x) const { return c1 * std::exp(r1 * x) + c2 * std::exp(r2 * x); }
    double yp(double x) const { return c1 * r1 * std::exp(r1 * x) + c2 * r2 * std::exp(r2 * x); }

    /// Trajectory on the chart (x, y, z = y') sampled on a uniform grid.
    Trajectory sample(std::pair<double, double> span, std::size_t points) const {
        Trajectory traj;
        traj.method = "characteristic-roots";
        traj.tol = 0.0;
        traj.max_step = (span.second - span.first) / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i) {
            double x = span.first + (span.second - span.first) * static_cast<double>(i) /
                                        static_cast<double>(points - 1);
            double yy = y(x), zz = yp(x);
            double ypp = c1 * r1 * r1 * std::exp(r1 * x) + c2 * r2 * r2 * std::exp(r2 * x);
            traj.ts.push_back(x);
            traj.states.push_back({x, yy, zz});
            traj.derivs.push_back({1.0, zz, ypp});
            ++traj.steps;
        }
        return traj;
    }
};

/// Max over trajectory samples of |omega(tangent)| with tangents taken from
/// the stored derivatives: the pointwise annihilation residual of Eq-style
/// solution curves.
inline double curve_annihilation(const Trajectory& traj, const KForm& w) {
    if (w.degree() != 1) throw DegreeError("curve_annihilation: 1-forms only");
    const Chart& ch = w.chart();
    if (ch.dim() != traj.dim()) throw Error("curve_annihilation: chart/trajectory dimension mismatch");
    double worst = 0.0;
    for (std::size_t s = 0; s < traj.ts.size(); ++s) {
        NumericBinding env;
        for (std::size_t i = 0; i < ch.dim(); ++i) env[ch.name(i)] = traj.states[s][i];
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < ch.dim(); ++i) {
            if (is_zero(w.at(i))) continue;
            acc += eval_numeric(w.at(i), env) * traj.derivs[s][i];
        }
        worst = std::max(worst, std::abs(acc));
    }
    return worst;
}

/// Pointwise evaluation on a grid; imaginary parts below 1e-10 are dropped.
inline std::vector<std::complex<double>> sample_asymptotic(const Expr& e,
                                                           const std::vector<double>& grid,
                                                           const std::string& grid_var,
                                                           const NumericBinding& params) {
    std::vector<std::complex<double>> out;
    out.reserve(grid.size());
    for (double g : grid) {
        NumericBinding env = params;
        env[grid_var] = g;
        std::complex<double> v = eval_numeric(e, env);
        if (std::abs(v.imag()) < 1e-10) v = {v.real(), 0.0};
        out.push_back(v);
    }
    return out;
}

/// Least-squares slope of log(error) against log(eps).
inline double error_scaling(const std::vector<std::pair<double, double>>& errors) {
    if (errors.size() < 3) throw Error("error_scaling: need at least 3 (eps, error) points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [eps, err] : errors) {
        if (err <= 0.0 || eps <= 0.0) throw Error("error_scaling: nonpositive value (degenerate fit)");
        double lx = std::log(eps), ly = std::log(err);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double m = static_cast<double>(errors.size());
    double denom = m * sxx - sx * sx;
    if (denom == 0.0) throw Error("error_scaling: degenerate abscissae");
    return (m * sxy - sx * sy) / denom;
}

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

struct NamedCheck {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string comparison;  // "<=", ">=", "decreasing", ...
};

struct ErrorCurvePoint {
    std::string case_name;
    double eps;
    double abscissa;
    double reference;
    double asymptotic;
    double abs_error;
};

/// Every number in the report is attached to a named check or a curve row.
struct ValidationReport {
    std::vector<NamedCheck> checks;
    std::vector<std::pair<double, double>> eps_errors;  // (eps, max abs error)
    double scaling_exponent = 0.0;
    bool has_scaling = false;
    std::vector<std::pair<std::string, double>> annihilation;  // (form label, max residual)
    double residual_norm = 0.0;
    std::vector<ErrorCurvePoint> curve;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// CSV error curves: case, epsilon, x_or_t, reference, asymptotic, abs_error.
inline std::string error_curve_csv(const std::vector<ErrorCurvePoint>& rows) {
    std::ostringstream os;
    os << "case,epsilon,x_or_t,reference,asymptotic,abs_error\n";
    for (const auto& r : rows) {
        os << r.case_name << ',' << format_double(r.eps) << ',' << format_double(r.abscissa) << ','
           << format_double(r.reference) << ',' << format_double(r.asymptotic) << ','
           << format_double(r.abs_error) << '\n';
    }
    return os.str();
}

}  // namespace cartan
