#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cartan/calculus.hpp"
#include "cartan/expr.hpp"
#include "cartan/numeric.hpp"
#include "cartan/printer.hpp"

namespace cartan {

class ChartMismatchError : public Error {
public:
    explicit ChartMismatchError(const std::string& what) : Error(what) {}
};

class DegreeError : public Error {
public:
    explicit DegreeError(const std::string& what) : Error(what) {}
};

class DegenerateBasisError : public Error {
public:
    explicit DegenerateBasisError(const std::string& what) : Error(what) {}
};

/// Ordered coordinate chart; order fixes component indexing.
class Chart {
public:
    Chart() = default;
    explicit Chart(std::vector<std::string> coords) : coords_(std::move(coords)) {
        for (std::size_t i = 0; i < coords_.size(); ++i)
            for (std::size_t j = i + 1; j < coords_.size(); ++j)
                if (coords_[i] == coords_[j]) throw Error("Chart: duplicate coordinate " + coords_[i]);
    }

    std::size_t dim() const { return coords_.size(); }
    const std::string& name(std::size_t i) const { return coords_.at(i); }
    const std::vector<std::string>& names() const { return coords_; }

    std::size_t index(const std::string& name) const {
        for (std::size_t i = 0; i < coords_.size(); ++i)
            if (coords_[i] == name) return i;
        throw Error("Chart: unknown coordinate " + name);
    }

    bool operator==(const Chart& o) const { return coords_ == o.coords_; }
    bool operator!=(const Chart& o) const { return !(*this == o); }

private:
    std::vector<std::string> coords_;
};

inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
    // index of (i, j), i < j, in lexicographic order over increasing pairs
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

/// Differential form of degree 0, 1 or 2 with canonical Expr coefficients.
/// Degree-2 coefficients are stored on strictly increasing index pairs only.
class KForm {
public:
    KForm() = default;

    static KForm function(Chart chart, Expr f) {
        KForm w;
        w.chart_ = std::move(chart);
        w.degree_ = 0;
        w.comp_ = {canonicalize(std::move(f))};
        return w;
    }

    static KForm zero(Chart chart, int degree) {
        KForm w;
        w.degree_ = degree;
        std::size_t n = chart.dim();
        w.chart_ = std::move(chart);
        std::size_t count = degree == 0 ? 1 : (degree == 1 ? n : n * (n - 1) / 2);
        w.comp_.assign(count, constant(0L));
        return w;
    }

    static KForm one_form(Chart chart, std::vector<Expr> comps) {
        if (comps.size() != chart.dim()) throw Error("one_form: component count mismatch");
        KForm w;
        w.chart_ = std::move(chart);
        w.degree_ = 1;
        for (auto& c : comps) c = canonicalize(c);
        w.comp_ = std::move(comps);
        return w;
    }

    /// dx_i basis one-form.
    static KForm coordinate(const Chart& chart, std::size_t i) {
        KForm w = zero(chart, 1);
        w.comp_[i] = constant(1L);
        return w;
    }

    const Chart& chart() const { return chart_; }
    int degree() const { return degree_; }

    const Expr& scalar() const {
        if (degree_ != 0) throw DegreeError("scalar(): degree != 0");
        return comp_[0];
    }

    const Expr& at(std::size_t i) const {
        if (degree_ != 1) throw DegreeError("at(i): degree != 1");
        return comp_.at(i);
    }

    /// Signed degree-2 coefficient for arbitrary index order.
    Expr at(std::size_t i, std::size_t j) const {
        if (degree_ != 2) throw DegreeError("at(i,j): degree != 2");
        if (i == j) return constant(0L);
        if (i < j) return comp_.at(pair_index(i, j, chart_.dim()));
        return neg(comp_.at(pair_index(j, i, chart_.dim())));
    }

    void set(std::size_t i, Expr v) {
        if (degree_ != 1) throw DegreeError("set(i): degree != 1");
        comp_.at(i) = canonicalize(std::move(v));
    }

    void set(std::size_t i, std::size_t j, Expr v) {
        if (degree_ != 2) throw DegreeError("set(i,j): degree != 2");
        if (i == j) throw Error("set(i,i) on a 2-form");
        if (i < j)
            comp_.at(pair_index(i, j, chart_.dim())) = canonicalize(std::move(v));
        else
            comp_.at(pair_index(j, i, chart_.dim())) = canonicalize(neg(std::move(v)));
    }

    const std::vector<Expr>& components() const { return comp_; }

    bool is_zero_form() const {
        for (const auto& c : comp_)
            if (!is_zero(c)) return false;
        return true;
    }

    friend KForm operator+(const KForm& a, const KForm& b) {
        a.check_same(b);
        KForm r = a;
        for (std::size_t k = 0; k < r.comp_.size(); ++k) r.comp_[k] = add(a.comp_[k], b.comp_[k]);
        return r;
    }

    friend KForm operator-(const KForm& a, const KForm& b) {
        a.check_same(b);
        KForm r = a;
        for (std::size_t k = 0; k < r.comp_.size(); ++k) r.comp_[k] = sub(a.comp_[k], b.comp_[k]);
        return r;
    }

    /// Scalar-function multiple.
    friend KForm operator*(const Expr& f, const KForm& w) {
        KForm r = w;
        for (auto& c : r.comp_) c = mul(f, c);
        return r;
    }

    bool operator==(const KForm& o) const {
        if (chart_ != o.chart_ || degree_ != o.degree_) return false;
        for (std::size_t k = 0; k < comp_.size(); ++k)
            if (!expr_eq(comp_[k], o.comp_[k])) return false;
        return true;
    }

private:
    void check_same(const KForm& o) const {
        if (chart_ != o.chart_) throw ChartMismatchError("forms on different charts");
        if (degree_ != o.degree_) throw DegreeError("forms of different degree");
    }

    Chart chart_;
    int degree_ = 0;
    std::vector<Expr> comp_;
};

/// Vector field: one Expr component per chart coordinate.
class VectorField {
public:
    VectorField() = default;
    VectorField(Chart chart, std::vector<Expr> comps) : chart_(std::move(chart)) {
        if (comps.size() != chart_.dim()) throw Error("VectorField: component count mismatch");
        for (auto& c : comps) c = canonicalize(c);
        comp_ = std::move(comps);
    }

    static VectorField zero(Chart chart) {
        std::size_t n = chart.dim();
        return VectorField(std::move(chart), std::vector<Expr>(n, constant(0L)));
    }

    const Chart& chart() const { return chart_; }
    const Expr& at(std::size_t i) const { return comp_.at(i); }
    const std::vector<Expr>& components() const { return comp_; }

    bool operator==(const VectorField& o) const {
        if (chart_ != o.chart_) return false;
        for (std::size_t k = 0; k < comp_.size(); ++k)
            if (!expr_eq(comp_[k], o.comp_[k])) return false;
        return true;
    }

private:
    Chart chart_;
    std::vector<Expr> comp_;
};

/// First-order system dx_i/dt = F_i(x) with the curve parameter named.
struct ODESystem {
    Chart chart;
    std::vector<Expr> rhs;
    std::string param;

    ODESystem(Chart c, std::vector<Expr> F, std::string t)
        : chart(std::move(c)), rhs(std::move(F)), param(std::move(t)) {
        if (rhs.size() != chart.dim()) throw Error("ODESystem: rhs count mismatch");
        for (auto& f : rhs) {
            f = canonicalize(f);
            for (const auto& s : free_atoms(f)) {
                bool known = false;
                for (const auto& c2 : chart.names())
                    if (c2 == s) known = true;
                if (!known)
                    throw Error("ODESystem: rhs symbol '" + s + "' is not a chart coordinate");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Exterior calculus operators
// ---------------------------------------------------------------------------

/// d: degree 0 -> 1 -> 2; d(d(w)) == 0. 3-forms are out of scope.
inline KForm exterior_derivative(const KForm& w) {
    const Chart& ch = w.chart();
    std::size_t n = ch.dim();
    if (w.degree() == 0) {
        KForm r = KForm::zero(ch, 1);
        for (std::size_t i = 0; i < n; ++i) r.set(i, differentiate(w.scalar(), ch.name(i)));
        return r;
    }
    if (w.degree() == 1) {
        KForm r = KForm::zero(ch, 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                r.set(i, j, sub(differentiate(w.at(j), ch.name(i)), differentiate(w.at(i), ch.name(j))));
        return r;
    }
    throw DegreeError("exterior_derivative: degree-2 input (3-forms unsupported)");
}

/// Graded wedge product; total degree must stay <= 2.
inline KForm wedge(const KForm& a, const KForm& b) {
    if (a.chart() != b.chart()) throw ChartMismatchError("wedge: different charts");
    int deg = a.degree() + b.degree();
    if (deg > 2) throw DegreeError("wedge: degree overflow");
    const Chart& ch = a.chart();
    std::size_t n = ch.dim();
    if (a.degree() == 0) return a.scalar() * b;
    if (b.degree() == 0) return b.scalar() * a;
    KForm r = KForm::zero(ch, 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            r.set(i, j, sub(mul(a.at(i), b.at(j)), mul(a.at(j), b.at(i))));
    return r;
}

/// Interior product i_X; degree must be >= 1.
inline KForm interior_product(const VectorField& X, const KForm& w) {
    if (X.chart() != w.chart()) throw ChartMismatchError("interior_product: different charts");
    const Chart& ch = w.chart();
    std::size_t n = ch.dim();
    if (w.degree() == 0) throw DegreeError("interior_product: degree-0 input");
    if (w.degree() == 1) {
        std::vector<Expr> parts;
        for (std::size_t i = 0; i < n; ++i) parts.push_back(mul(X.at(i), w.at(i)));
        return KForm::function(ch, add(std::move(parts)));
    }
    KForm r = KForm::zero(ch, 1);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<Expr> parts;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            parts.push_back(mul(X.at(i), w.at(i, j)));
        }
        r.set(j, add(std::move(parts)));
    }
    return r;
}

/// Lie derivative by the Cartan formula: L_X w = i_X(dw) + d(i_X w);
/// for functions L_X f = i_X(df).
inline KForm lie_derivative(const VectorField& X, const KForm& w) {
    if (w.degree() == 0) return interior_product(X, exterior_derivative(w));
    if (w.degree() > 1) throw DegreeError("lie_derivative: degree must be <= 1");
    return interior_product(X, exterior_derivative(w)) + exterior_derivative(interior_product(X, w));
}

/// Lie derivative of a scalar expression (0-form convenience).
inline Expr lie_derivative(const VectorField& X, const Expr& f) {
    std::vector<Expr> parts;
    for (std::size_t i = 0; i < X.chart().dim(); ++i)
        parts.push_back(mul(X.at(i), differentiate(f, X.chart().name(i))));
    return add(std::move(parts));
}

/// Encode dx_i = F_i dt as w_ij = F_i dx_j - F_j dx_i (i < j): every
/// solution curve annihilates the returned one-forms.
inline std::vector<KForm> ode_to_forms(const ODESystem& sys) {
    std::size_t n = sys.chart.dim();
    if (n < 2) throw Error("ode_to_forms: need at least 2 coordinates");
    std::vector<KForm> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            KForm w = KForm::zero(sys.chart, 1);
            w.set(j, sys.rhs[i]);
            w.set(i, neg(sys.rhs[j]));
            out.push_back(std::move(w));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Span membership by exact symbolic linear algebra
// ---------------------------------------------------------------------------

namespace detail {

/// Laplace-expansion determinant of a small Expr matrix.
inline Expr expr_det(const std::vector<std::vector<Expr>>& m) {
    std::size_t n = m.size();
    if (n == 0) return constant(1L);
    if (n == 1) return m[0][0];
    std::vector<Expr> parts;
    for (std::size_t c = 0; c < n; ++c) {
        if (is_zero(m[0][c])) continue;
        std::vector<std::vector<Expr>> minor;
        for (std::size_t r = 1; r < n; ++r) {
            std::vector<Expr> row;
            for (std::size_t cc = 0; cc < n; ++cc)
                if (cc != c) row.push_back(m[r][cc]);
            minor.push_back(std::move(row));
        }
        Expr term = mul(m[0][c], expr_det(minor));
        parts.push_back(c % 2 == 0 ? term : neg(term));
    }
    return add(std::move(parts));
}

/// Symbolic rank via division-free elimination with canonical-zero pivots.
inline std::size_t expr_rank(std::vector<std::vector<Expr>> m) {
    if (m.empty()) return 0;
    std::size_t rows = m.size(), cols = m[0].size(), rank = 0;
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols && r < rows; ++c) {
        std::size_t pivot = rows;
        for (std::size_t rr = r; rr < rows; ++rr)
            if (!is_zero(m[rr][c])) { pivot = rr; break; }
        if (pivot == rows) continue;
        std::swap(m[r], m[pivot]);
        for (std::size_t rr = r + 1; rr < rows; ++rr) {
            if (is_zero(m[rr][c])) continue;
            for (std::size_t cc = c + 1; cc < cols; ++cc)
                m[rr][cc] = sub(mul(m[r][c], m[rr][cc]), mul(m[rr][c], m[r][cc]));
            m[rr][c] = constant(0L);
        }
        ++r;
        ++rank;
    }
    return rank;
}

}  // namespace detail

/// If w == sum_j c_j basis_j has a solution with coefficients in the
/// expression class, returns the c_j; otherwise nullopt. The returned
/// coefficients verify exactly (the difference canonicalizes to zero).
/// A symbolically rank-deficient basis is an error, distinct from "not
/// in span".
inline std::optional<std::vector<Expr>> in_span(const KForm& w, const std::vector<KForm>& basis) {
    if (basis.empty()) {
        if (w.is_zero_form()) return std::vector<Expr>{};
        return std::nullopt;
    }
    const Chart& ch = w.chart();
    std::size_t n = ch.dim(), m = basis.size();
    if (w.degree() != 1) throw DegreeError("in_span: 1-forms only");
    for (const auto& b : basis) {
        if (b.chart() != ch) throw ChartMismatchError("in_span: different charts");
        if (b.degree() != 1) throw DegreeError("in_span: 1-forms only");
    }

    std::vector<std::vector<Expr>> M(n, std::vector<Expr>(m));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < m; ++j) M[k][j] = basis[j].at(k);

    if (detail::expr_rank(M) < m)
        throw DegenerateBasisError("in_span: basis is symbolically rank-deficient");

    // choose m rows with nonzero Cramer determinant (first combination in
    // lexicographic order), solve the square subsystem exactly
    std::vector<std::size_t> rows;
    Expr det;
    std::vector<std::size_t> comb(m);
    std::function<bool(std::size_t, std::size_t)> choose = [&](std::size_t start, std::size_t k) {
        if (k == m) {
            std::vector<std::vector<Expr>> sq(m, std::vector<Expr>(m));
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < m; ++b) sq[a][b] = M[comb[a]][b];
            Expr d = detail::expr_det(sq);
            if (!is_zero(d)) {
                rows = comb;
                det = d;
                return true;
            }
            return false;
        }
        for (std::size_t r = start; r + (m - k) <= n; ++r) {
            comb[k] = r;
            if (choose(r + 1, k + 1)) return true;
        }
        return false;
    };
    if (!choose(0, 0))
        throw DegenerateBasisError("in_span: no invertible subsystem (degenerate basis)");

    std::vector<Expr> coeffs(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<std::vector<Expr>> sq(m, std::vector<Expr>(m));
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                sq[a][b] = (b == j) ? w.at(rows[a]) : M[rows[a]][b];
        coeffs[j] = div(detail::expr_det(sq), det);
    }

    // exact verification over every component
    KForm recon = KForm::zero(ch, 1);
    for (std::size_t j = 0; j < m; ++j) recon = recon + coeffs[j] * basis[j];
    if (!(recon == w)) {
        KForm diff = w - recon;
        for (const auto& c : diff.components())
            if (!is_zero(c)) return std::nullopt;
    }
    return coeffs;
}

}  // namespace cartan
