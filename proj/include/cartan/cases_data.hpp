#pragma once
// Built-in case definitions. These are byte-identical copies of the files
// under cases/ (a unit test keeps them in sync).

namespace cartan::builtin_cases {

inline constexpr const char* k_boundary_layer = R"__json__({
  "schema_version": 1,
  "name": "boundary_layer",
  "chart": ["x", "y", "z"],
  "independent": "x",
  "eps": "eps",
  "zero_order_forms": [{"x": "-z", "y": "1"}, {"x": "y", "y": "1"}],
  "perturbation_forms": [{}, {"z": "-1"}],
  "ansatz": {
    "vector_field_terms": ["ln(y+z)", "y*ln(y+z)", "z", "y"],
    "multiplier_terms": ["1", "ln(y+z)", "y/(y+z)", "y*ln(y+z)/(y+z)"],
    "mask": ["x", "y"],
    "extend_depth": 0
  },
  "invariants": [{"expr": "x - x0", "constant": "x0"}],
  "substitutions": {"z": "y'"},
  "pipeline": {
    "exp_relation": {"constant": "x0", "new_constant": "A"},
    "linear_ode": {"dependent": "y", "independent": "x", "homogeneous_constant": "B"}
  },
  "expected": {
    "generator": {"x": "ln(y+z)", "y": "z - y*ln(y+z)", "z": "0"},
    "solution": "A*eps/(eps-1)*exp(-x/eps) + B*exp(-x)"
  },
  "sampling_box": {"x": [0.0, 1.0], "y": [0.2, 1.5], "z": [0.2, 1.5]},
  "validation": {
    "reference": {"kind": "characteristic_roots", "a2": "eps", "a1": "1", "a0": "1"},
    "initial_conditions": {"y": 0.0, "y'": 1.0},
    "span": [0.0, 1.0],
    "tolerance": 1e-10,
    "grid_points": 400,
    "eps_ladder": [0.1, 0.05, 0.025],
    "annihilation_chart": ["x", "y", "z"],
    "annihilation_forms": [{"x": "-z", "y": "1"}, {"x": "y", "y": "1", "z": "eps"}],
    "monotone_errors": true,
    "min_scaling_exponent": 0.8,
    "annihilation_tol_factor": 10.0,
    "residual_norm_max": 1e-9,
    "fit_constants": [0, 1]
  }
}
)__json__";

inline constexpr const char* k_nonlinear_damping = R"__json__({
  "schema_version": 1,
  "name": "nonlinear_damping",
  "chart": ["t", "u", "th"],
  "independent": "t",
  "eps": "eps",
  "zero_order_forms": [{"u": "1"}, {"th": "u"}],
  "perturbation_forms": [
    {"t": "3/4 - cos(2*(t+th)) + 1/4*cos(4*(t+th))"},
    {"t": "1/4*sin(2*(t+th)) - 1/8*sin(4*(t+th))"}
  ],
  "ansatz": {
    "vector_field_terms": ["cos(2*(t+th))", "cos(4*(t+th))", "cos(2*(t+th))/u", "cos(4*(t+th))/u"],
    "multiplier_terms": ["1/u"],
    "mask": ["u", "th"],
    "extend_depth": 2
  },
  "invariants": [
    {"expr": "u - u0", "constant": "u0"},
    {"expr": "th - th0", "constant": "th0"}
  ],
  "substitutions": {},
  "pipeline": {
    "secular_limit": {"variable": "t"},
    "amplitude": {
      "constant": "u0",
      "variable": "u",
      "change": "R^(-2)",
      "output": "R",
      "constant_change": {"u0": "1/R0^2"}
    }
  },
  "expected": {
    "generator": {
      "t": "0",
      "u": "-(3/4*t - 1/2*sin(2*(t+th)) + 1/16*sin(4*(t+th)))",
      "th": "(1/u)*(1/8*cos(2*(t+th)) - 1/32*cos(4*(t+th)))"
    },
    "amplitude": "R0/sqrt(1 + 3/4*R0^2*eps*t)"
  },
  "sampling_box": {"t": [0.0, 5.0], "u": [0.4, 2.0], "th": [0.0, 6.0]},
  "validation": {
    "reference": {"kind": "rk45", "chart": ["t", "y", "z"], "rhs": ["1", "z", "-y - eps*z^3"]},
    "initial_conditions": {"y": 1.0, "z": 0.0},
    "span": [0.0, 100.0],
    "tolerance": 1e-10,
    "grid_points": 400,
    "eps_ladder": [0.1, 0.05, 0.025],
    "annihilation_chart": ["t", "y", "z"],
    "annihilation_forms": [
      {
        "t": "-2*eps*(3/8 - 1/2*(y^2-z^2)/(y^2+z^2) + 1/8*(2*(y^2-z^2)^2/(y^2+z^2)^2 - 1))",
        "y": "-2*y/(y^2+z^2)^2",
        "z": "-2*z/(y^2+z^2)^2"
      },
      {
        "t": "-1/(y^2+z^2) + eps*(-1/2*y*z/(y^2+z^2) + 1/2*y*z*(y^2-z^2)/(y^2+z^2)^2)",
        "y": "z/(y^2+z^2)^2",
        "z": "-y/(y^2+z^2)^2"
      }
    ],
    "amplitude": {
      "eps": 0.05,
      "window": [10.0, 100.0],
      "rel_tol": 0.03,
      "envelope": "sqrt(y^2 + z^2)"
    },
    "annihilation_tol_factor": 10.0,
    "residual_norm_max": 1e-9
  }
}
)__json__";

inline constexpr const char* k_wkb = R"__json__({
  "schema_version": 1,
  "name": "wkb",
  "chart": ["x", "u", "v"],
  "independent": "x",
  "eps": "eps2",
  "zero_order_forms": [{"x": "1"}, {"u": "1"}],
  "perturbation_forms": [
    {"v": "-1/(2*Om(x)^2*sqrt(u)*sqrt(v))"},
    {"v": "-1/Om(x)^2"}
  ],
  "ansatz": {
    "vector_field_terms": ["sqrt(v/u)/Om(x)^2", "v/Om(x)^2"],
    "multiplier_terms": [
      "1",
      "Om'(x)*sqrt(v/u)/Om(x)^3",
      "sqrt(v)/(sqrt(u)^3*Om(x)^2)",
      "Om'(x)*v/Om(x)^3"
    ],
    "mask": ["x", "u"],
    "extend_depth": 0
  },
  "invariants": [
    {"expr": "x - x0", "constant": "x0"},
    {"expr": "u - u0", "constant": "u0"}
  ],
  "substitutions": {},
  "pipeline": {
    "wkb_phase": {"omega": "Om(x)", "true_eps": "eps", "dependent": "y"}
  },
  "expected": {
    "generator": {"x": "sqrt(v/u)/Om(x)^2", "u": "v/Om(x)^2", "v": "0"}
  },
  "sampling_box": {
    "x": [0.0, 1.0],
    "u": [0.3, 2.0],
    "v": [0.3, 2.0],
    "Om": [0.5, 2.0],
    "Om'": [-1.0, 1.0]
  },
  "validation": {
    "reference": {"kind": "rk45", "chart": ["x", "y", "z"], "rhs": ["1", "z", "-Om(x)^2*y/eps2"]},
    "initial_conditions": {"y": 1.0, "z": 0.0},
    "span": [0.0, 1.0],
    "tolerance": 1e-10,
    "grid_points": 400,
    "eps_ladder": [0.1, 0.05, 0.025],
    "annihilation_chart": ["x", "y", "z"],
    "annihilation_forms": [{"x": "-z", "y": "1"}, {"x": "Om(x)^2*y", "z": "eps2"}],
    "wkb_instances": [
      {"name": "omega_const", "omega": "1", "exact_tol_factor": 10.0},
      {"name": "omega_linear", "omega": "1 + x", "require_decreasing": true}
    ],
    "residual_norm_max": 1e-9
  }
}
)__json__";

}  // namespace cartan::builtin_cases
