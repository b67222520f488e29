#pragma once

#include <algorithm>
#include <cassert>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cartan/rational.hpp"

namespace cartan {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class Kind { Constant, Symbol, FuncDeriv, Func, Power, Product, Sum };

enum class Fn { Sin, Cos, Exp, Ln, Sqrt };

inline const char* fn_name(Fn f) {
    switch (f) {
        case Fn::Sin: return "sin";
        case Fn::Cos: return "cos";
        case Fn::Exp: return "exp";
        case Fn::Ln: return "ln";
        case Fn::Sqrt: return "sqrt";
    }
    return "?";
}

struct Node;
using Expr = std::shared_ptr<const Node>;

/// Immutable expression node. Raw constructors build uncanonicalized trees
/// (used by the parser and by tests); the smart constructors further down
/// always return canonical values.
///
/// Canonical form: sums of terms, each term an exact complex-rational
/// coefficient times a product of atom^rational factors. Products of sums
/// are distributed, integer powers of sums expanded, trig products and
/// integer trig powers rewritten in Fourier form (single sin/cos per term),
/// exponential factors merged, and fractions over a shared compound
/// denominator cancelled by exact polynomial division.
struct Node {
    Kind kind;
    RatC value;              // Constant; Product coefficient
    std::string name;        // Symbol, FuncDeriv
    int deriv_order = 0;     // FuncDeriv: 0 = the function itself
    Fn fn = Fn::Sin;         // Func
    Rational expo;           // Power exponent (always an exact rational)
    std::vector<Expr> kids;  // Sum terms / Product factors / Power base / Func arg / FuncDeriv arg
    bool canonical = false;
    std::size_t hash = 0;

    explicit Node(Kind k) : kind(k) {}
};

namespace detail {

inline std::size_t compute_hash(const Node& n) {
    std::size_t h = std::hash<int>{}(static_cast<int>(n.kind));
    switch (n.kind) {
        case Kind::Constant: h = hash_combine(h, hash_ratc(n.value)); break;
        case Kind::Symbol: h = hash_combine(h, std::hash<std::string>{}(n.name)); break;
        case Kind::FuncDeriv:
            h = hash_combine(h, std::hash<std::string>{}(n.name));
            h = hash_combine(h, std::hash<int>{}(n.deriv_order));
            break;
        case Kind::Func: h = hash_combine(h, std::hash<int>{}(static_cast<int>(n.fn))); break;
        case Kind::Power: h = hash_combine(h, hash_rational(n.expo)); break;
        case Kind::Product: h = hash_combine(h, hash_ratc(n.value)); break;
        case Kind::Sum: break;
    }
    for (const auto& k : n.kids) h = hash_combine(h, k->hash);
    return h;
}

inline Expr finish(std::shared_ptr<Node> n, bool canonical) {
    n->canonical = canonical;
    n->hash = compute_hash(*n);
    return n;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw constructors
// ---------------------------------------------------------------------------

inline Expr raw_constant(RatC v) {
    auto n = std::make_shared<Node>(Kind::Constant);
    n->value = std::move(v);
    return detail::finish(std::move(n), true);
}

inline Expr raw_symbol(std::string name) {
    auto n = std::make_shared<Node>(Kind::Symbol);
    n->name = std::move(name);
    return detail::finish(std::move(n), true);
}

inline Expr raw_deriv(std::string name, int order, Expr arg = nullptr) {
    auto n = std::make_shared<Node>(Kind::FuncDeriv);
    n->name = std::move(name);
    n->deriv_order = order;
    if (arg) n->kids.push_back(std::move(arg));
    return detail::finish(std::move(n), false);
}

inline Expr raw_func(Fn f, Expr arg) {
    auto n = std::make_shared<Node>(Kind::Func);
    n->fn = f;
    n->kids.push_back(std::move(arg));
    return detail::finish(std::move(n), false);
}

inline Expr raw_power(Expr base, Rational q) {
    auto n = std::make_shared<Node>(Kind::Power);
    n->expo = std::move(q);
    n->kids.push_back(std::move(base));
    return detail::finish(std::move(n), false);
}

inline Expr raw_product(RatC coeff, std::vector<Expr> factors) {
    auto n = std::make_shared<Node>(Kind::Product);
    n->value = std::move(coeff);
    n->kids = std::move(factors);
    return detail::finish(std::move(n), false);
}

inline Expr raw_sum(std::vector<Expr> terms) {
    auto n = std::make_shared<Node>(Kind::Sum);
    n->kids = std::move(terms);
    return detail::finish(std::move(n), false);
}

// ---------------------------------------------------------------------------
// Structural comparison (total order; the basis of all canonical sorting)
// ---------------------------------------------------------------------------

inline int cmp_expr(const Expr& a, const Expr& b);

inline int cmp_expr_vec(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        if (int c = cmp_expr(a[i], b[i])) return c;
    if (a.size() < b.size()) return -1;
    if (a.size() > b.size()) return 1;
    return 0;
}

inline int kind_rank(Kind k) {
    switch (k) {
        case Kind::Constant: return 0;
        case Kind::Symbol: return 1;
        case Kind::FuncDeriv: return 2;
        case Kind::Func: return 3;
        case Kind::Power: return 4;
        case Kind::Product: return 5;
        case Kind::Sum: return 6;
    }
    return 7;
}

inline int cmp_expr(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return 0;
    int ra = kind_rank(a->kind), rb = kind_rank(b->kind);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a->kind) {
        case Kind::Constant: return cmp_ratc(a->value, b->value);
        case Kind::Symbol: {
            int c = a->name.compare(b->name);
            return c < 0 ? -1 : (c == 0 ? 0 : 1);
        }
        case Kind::FuncDeriv: {
            if (int c = a->name.compare(b->name)) return c < 0 ? -1 : 1;
            if (a->deriv_order != b->deriv_order) return a->deriv_order < b->deriv_order ? -1 : 1;
            return cmp_expr_vec(a->kids, b->kids);
        }
        case Kind::Func: {
            if (a->fn != b->fn) return static_cast<int>(a->fn) < static_cast<int>(b->fn) ? -1 : 1;
            return cmp_expr_vec(a->kids, b->kids);
        }
        case Kind::Power: {
            if (int c = cmp_expr(a->kids[0], b->kids[0])) return c;
            return cmp_rational(a->expo, b->expo);
        }
        case Kind::Product: {
            if (int c = cmp_expr_vec(a->kids, b->kids)) return c;
            return cmp_ratc(a->value, b->value);
        }
        case Kind::Sum: return cmp_expr_vec(a->kids, b->kids);
    }
    return 0;
}

inline bool expr_eq(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return true;
    if (a->hash != b->hash) return false;
    return cmp_expr(a, b) == 0;
}

struct ExprLess {
    bool operator()(const Expr& a, const Expr& b) const { return cmp_expr(a, b) < 0; }
};

// ---------------------------------------------------------------------------
// Term view: a canonical non-Sum expression seen as coeff * prod(base^expo)
// ---------------------------------------------------------------------------

struct Factor {
    Expr base;
    Rational expo;  // never 0
};

struct Term {
    RatC coeff;
    std::vector<Factor> factors;  // sorted by base, bases unique
};

inline int cmp_factor(const Factor& a, const Factor& b) {
    if (int c = cmp_expr(a.base, b.base)) return c;
    return cmp_rational(a.expo, b.expo);
}

inline int cmp_monomial(const std::vector<Factor>& a, const std::vector<Factor>& b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i)
        if (int c = cmp_factor(a[i], b[i])) return c;
    if (a.size() < b.size()) return -1;
    if (a.size() > b.size()) return 1;
    return 0;
}

inline void sort_factors(std::vector<Factor>& fs) {
    std::sort(fs.begin(), fs.end(), [](const Factor& a, const Factor& b) { return cmp_factor(a, b) < 0; });
}

inline Expr canonicalize(const Expr& e);

namespace detail {

inline Expr zero_expr() { return raw_constant(RatC(0)); }
inline Expr one_expr() { return raw_constant(RatC(1)); }

inline Expr make_power_node(Expr base, Rational q) {
    auto n = std::make_shared<Node>(Kind::Power);
    n->expo = std::move(q);
    n->kids.push_back(std::move(base));
    return finish(std::move(n), true);
}

inline Expr make_func_node(Fn f, Expr arg) {
    auto n = std::make_shared<Node>(Kind::Func);
    n->fn = f;
    n->kids.push_back(std::move(arg));
    return finish(std::move(n), true);
}

}  // namespace detail

/// Split a canonical non-Sum expr into coefficient and factor list.
inline Term term_view(const Expr& e) {
    Term t;
    t.coeff = RatC(1);
    switch (e->kind) {
        case Kind::Constant:
            t.coeff = e->value;
            return t;
        case Kind::Product: {
            t.coeff = e->value;
            for (const auto& f : e->kids) {
                if (f->kind == Kind::Power)
                    t.factors.push_back({f->kids[0], f->expo});
                else
                    t.factors.push_back({f, Rational(1)});
            }
            return t;
        }
        case Kind::Power:
            t.factors.push_back({e->kids[0], e->expo});
            return t;
        default:
            t.factors.push_back({e, Rational(1)});
            return t;
    }
}

/// Rebuild a canonical expression from a normalized term (factors sorted,
/// bases unique, exponents nonzero).
inline Expr term_build(const Term& t) {
    if (t.coeff.is_zero() || t.factors.empty()) return raw_constant(t.coeff);
    std::vector<Expr> kids;
    kids.reserve(t.factors.size());
    for (const auto& f : t.factors) {
        if (f.expo == 1)
            kids.push_back(f.base);
        else
            kids.push_back(detail::make_power_node(f.base, f.expo));
    }
    if (t.coeff.is_one() && kids.size() == 1) return kids[0];
    auto n = std::make_shared<Node>(Kind::Product);
    n->value = t.coeff;
    n->kids = std::move(kids);
    return detail::finish(std::move(n), true);
}

namespace detail {

Expr canon_product(RatC coeff, std::vector<Factor> factors);
Expr canon_sum(std::vector<Expr> parts);
Expr canon_power(const Expr& base, const Rational& q);

// --- exact multivariate polynomial division over term lists ----------------

struct PolyTerm {
    RatC coeff;
    std::vector<Rational> expo;
};

inline bool grlex_less(const PolyTerm& a, const PolyTerm& b) {
    Rational ga(0), gb(0);
    for (const auto& q : a.expo) ga += q;
    for (const auto& q : b.expo) gb += q;
    if (ga != gb) return ga < gb;
    for (std::size_t i = 0; i < a.expo.size(); ++i)
        if (a.expo[i] != b.expo[i]) return a.expo[i] < b.expo[i];
    return false;
}

struct DivRem {
    std::vector<Term> quotient;
    std::vector<Term> remainder;
};

/// Multivariate polynomial division with remainder over arbitrary atoms with
/// nonnegative rational exponents, using graded lexicographic order over
/// canonically sorted atoms (deterministic). Leading terms divisible by the
/// divisor's lead are reduced; everything else moves to the remainder.
/// Returns nullopt when an input carries negative exponents (not a polynomial).
inline std::optional<DivRem> divide_with_remainder_terms(const std::vector<Term>& num,
                                                         const std::vector<Term>& den) {
    if (den.empty()) return std::nullopt;
    std::vector<Expr> atoms;
    {
        std::set<Expr, ExprLess> seen;
        for (const auto& t : num)
            for (const auto& f : t.factors) seen.insert(f.base);
        for (const auto& t : den)
            for (const auto& f : t.factors) seen.insert(f.base);
        atoms.assign(seen.begin(), seen.end());
    }
    auto atom_index = [&](const Expr& b) -> std::size_t {
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (expr_eq(atoms[i], b)) return i;
        throw Error("divide_with_remainder: missing atom");
    };
    bool ok = true;
    auto to_poly = [&](const std::vector<Term>& ts) {
        std::vector<PolyTerm> ps;
        for (const auto& t : ts) {
            PolyTerm p;
            p.coeff = t.coeff;
            p.expo.assign(atoms.size(), Rational(0));
            for (const auto& f : t.factors) {
                if (f.expo < 0) { ok = false; return ps; }
                p.expo[atom_index(f.base)] = f.expo;
            }
            ps.push_back(std::move(p));
        }
        return ps;
    };
    std::vector<PolyTerm> pn = to_poly(num);
    std::vector<PolyTerm> pd = to_poly(den);
    if (!ok) return std::nullopt;

    auto lead_index = [&](const std::vector<PolyTerm>& ps) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < ps.size(); ++i)
            if (grlex_less(ps[best], ps[i])) best = i;
        return best;
    };
    auto sub_term = [&](std::vector<PolyTerm>& ps, const PolyTerm& t) {
        for (auto& p : ps) {
            if (p.expo == t.expo) {
                p.coeff = p.coeff - t.coeff;
                if (p.coeff.is_zero()) {
                    p = ps.back();
                    ps.pop_back();
                }
                return;
            }
        }
        PolyTerm nt = t;
        nt.coeff = -nt.coeff;
        ps.push_back(std::move(nt));
    };

    std::vector<PolyTerm> quot, remainder;
    std::vector<PolyTerm> work = pn;
    const PolyTerm ld = pd[lead_index(pd)];
    const std::size_t guard = 16 * (pn.size() + 1) * (pd.size() + 1) + 64;
    std::size_t steps = 0;
    while (!work.empty()) {
        if (++steps > guard) return std::nullopt;  // pathological growth: give up
        std::size_t li = lead_index(work);
        PolyTerm lr = work[li];
        PolyTerm q;
        q.coeff = lr.coeff / ld.coeff;
        q.expo.assign(atoms.size(), Rational(0));
        bool divisible = true;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            Rational d = lr.expo[i] - ld.expo[i];
            if (d < 0) { divisible = false; break; }
            q.expo[i] = d;
        }
        if (!divisible) {
            // move the lead to the remainder; grlex strictly decreases
            remainder.push_back(lr);
            work[li] = work.back();
            work.pop_back();
            continue;
        }
        quot.push_back(q);
        for (const auto& dt : pd) {
            PolyTerm prod;
            prod.coeff = q.coeff * dt.coeff;
            prod.expo.assign(atoms.size(), Rational(0));
            for (std::size_t i = 0; i < atoms.size(); ++i) prod.expo[i] = q.expo[i] + dt.expo[i];
            sub_term(work, prod);
        }
    }
    auto rebuild = [&](const std::vector<PolyTerm>& ps) {
        std::vector<Term> out;
        for (const auto& q : ps) {
            Term t;
            t.coeff = q.coeff;
            for (std::size_t i = 0; i < atoms.size(); ++i)
                if (q.expo[i] != 0) t.factors.push_back({atoms[i], q.expo[i]});
            sort_factors(t.factors);
            out.push_back(std::move(t));
        }
        return out;
    };
    return DivRem{rebuild(quot), rebuild(remainder)};
}

/// Exact division: quotient only when the remainder vanishes.
inline std::optional<std::vector<Term>> exact_divide_terms(const std::vector<Term>& num,
                                                           const std::vector<Term>& den) {
    auto dr = divide_with_remainder_terms(num, den);
    if (!dr || !dr->remainder.empty()) return std::nullopt;
    return dr->quotient;
}

// --- trig reduction ----------------------------------------------------------

/// True when the canonical expression's first term carries a negative
/// coefficient; used to orient trig arguments (sin(-a) = -sin(a)).
inline bool leading_negative(const Expr& e) {
    const Node* t = e.get();
    if (e->kind == Kind::Sum) t = e->kids[0].get();
    RatC c(1);
    if (t->kind == Kind::Constant || t->kind == Kind::Product) c = t->value;
    if (c.re != 0) return c.re < 0;
    return c.im < 0;
}

inline Expr negate_canonical(const Expr& e) {
    if (e->kind == Kind::Sum) {
        std::vector<Expr> kids;
        kids.reserve(e->kids.size());
        for (const auto& k : e->kids) {
            Term t = term_view(k);
            t.coeff = -t.coeff;
            kids.push_back(term_build(t));
        }
        auto n = std::make_shared<Node>(Kind::Sum);
        n->kids = std::move(kids);  // monomial order is unchanged by negation
        return finish(std::move(n), true);
    }
    Term t = term_view(e);
    t.coeff = -t.coeff;
    return term_build(t);
}

struct TrigTerm {
    RatC coeff;
    int kind;    // 0 = constant, 1 = sin, 2 = cos
    Expr angle;  // canonical, sign-normalized
};

inline void trig_normalize(TrigTerm& t) {
    if (t.kind == 0) return;
    if (t.angle->kind == Kind::Constant && t.angle->value.is_zero()) {
        if (t.kind == 1) t.coeff = RatC(0);
        t.kind = 0;
        t.angle = nullptr;
        return;
    }
    if (leading_negative(t.angle)) {
        t.angle = negate_canonical(t.angle);
        if (t.kind == 1) t.coeff = -t.coeff;
    }
}

inline std::vector<TrigTerm> trig_mul(const std::vector<TrigTerm>& acc, int kind, const Expr& angle) {
    std::vector<TrigTerm> out;
    const RatC half(Rational(1, 2));
    for (const auto& t : acc) {
        auto push = [&](RatC c, int k, Expr a) {
            TrigTerm nt{std::move(c), k, std::move(a)};
            trig_normalize(nt);
            if (nt.coeff.is_zero()) return;
            out.push_back(std::move(nt));
        };
        if (t.kind == 0) {
            push(t.coeff, kind, angle);
            continue;
        }
        Expr sum_angle = canon_sum({t.angle, angle});
        Expr diff_angle = canon_sum({t.angle, negate_canonical(angle)});
        if (t.kind == 1 && kind == 1) {
            push(t.coeff * half, 2, diff_angle);
            push(-(t.coeff * half), 2, sum_angle);
        } else if (t.kind == 2 && kind == 2) {
            push(t.coeff * half, 2, diff_angle);
            push(t.coeff * half, 2, sum_angle);
        } else if (t.kind == 1 && kind == 2) {
            push(t.coeff * half, 1, sum_angle);
            push(t.coeff * half, 1, diff_angle);
        } else {  // cos * sin
            push(t.coeff * half, 1, sum_angle);
            push(-(t.coeff * half), 1, diff_angle);
        }
    }
    std::vector<TrigTerm> merged;
    for (auto& t : out) {
        bool found = false;
        for (auto& m : merged) {
            if (m.kind == t.kind && (m.kind == 0 || expr_eq(m.angle, t.angle))) {
                m.coeff += t.coeff;
                found = true;
                break;
            }
        }
        if (!found) merged.push_back(std::move(t));
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const TrigTerm& t) { return t.coeff.is_zero(); }),
                 merged.end());
    return merged;
}

// --- powers -------------------------------------------------------------------

inline Expr canon_constant_power(const RatC& v, const Rational& q) {
    if (is_integer(q)) return raw_constant(v.pow_int(to_long(q)));
    if (v.is_zero()) return zero_expr();
    if (v.is_one()) return one_expr();
    if (v.is_real() && v.re > 0) {
        long qd = static_cast<long>(rat_den(q));
        if (qd <= 64) {
            bool en = false, ed = false;
            BigInt rn = iroot(rat_num(v.re), static_cast<unsigned>(qd), en);
            BigInt rd = iroot(rat_den(v.re), static_cast<unsigned>(qd), ed);
            if (en && ed) {
                Rational root(rn, rd);
                return raw_constant(RatC(rat_pow(root, static_cast<long>(rat_num(q)))));
            }
        }
        return make_power_node(raw_constant(v), q);
    }
    if (v.is_real() && v.re < 0 && rat_den(q) == 2) {
        // (-r)^(p/2) = i^p * r^(p/2)
        RatC ip = RatC(Rational(0), Rational(1)).pow_int(static_cast<long>(rat_num(q)));
        Expr mag = canon_constant_power(RatC(Rational(-v.re)), q);
        Term t = term_view(mag);
        t.coeff *= ip;
        return term_build(t);
    }
    return make_power_node(raw_constant(v), q);
}

inline Rational rational_gcd(const Rational& a, const Rational& b) {
    BigInt n = boost::multiprecision::gcd(rat_num(a), rat_num(b));
    BigInt d = boost::multiprecision::lcm(rat_den(a), rat_den(b));
    return Rational(n, d);
}

inline Expr canon_power(const Expr& base, const Rational& q) {
    if (q == 0) return one_expr();
    if (q == 1) return base;
    switch (base->kind) {
        case Kind::Constant:
            return canon_constant_power(base->value, q);
        case Kind::Power:
            return canon_power(base->kids[0], Rational(base->expo * q));
        case Kind::Product: {
            Term t = term_view(base);
            RatC coeff(1);
            std::vector<Factor> all;
            {
                Expr cpow = canon_constant_power(t.coeff, q);
                Term ct = term_view(cpow);
                coeff *= ct.coeff;
                all = ct.factors;
            }
            for (const auto& f : t.factors) {
                Expr p = canon_power(f.base, Rational(f.expo * q));
                Term pt = term_view(p);
                coeff *= pt.coeff;
                all.insert(all.end(), pt.factors.begin(), pt.factors.end());
            }
            return canon_product(coeff, all);
        }
        case Kind::Sum: {
            if (is_integer(q) && q > 1 && q <= 16) {
                Expr acc = base;
                for (long i = 1; i < to_long(q); ++i) {
                    std::vector<Expr> atv = acc->kind == Kind::Sum ? acc->kids : std::vector<Expr>{acc};
                    std::vector<Expr> parts;
                    for (const auto& ta : atv)
                        for (const auto& tb : base->kids) {
                            Term a = term_view(ta), b = term_view(tb);
                            std::vector<Factor> fs = a.factors;
                            fs.insert(fs.end(), b.factors.begin(), b.factors.end());
                            parts.push_back(canon_product(a.coeff * b.coeff, fs));
                        }
                    acc = canon_sum(std::move(parts));
                }
                return acc;
            }
            // Factor out monomial content (per-atom minimum exponent; negative
            // minima clear inner denominators) plus rational content and sign,
            // so that e.g. (1/R0^2 + t)^(-1/2) normalizes with R0 pulled out.
            std::vector<Term> terms;
            for (const auto& k : base->kids) terms.push_back(term_view(k));
            std::map<Expr, Rational, ExprLess> minexp;
            {
                bool first = true;
                for (const auto& t : terms) {
                    std::map<Expr, Rational, ExprLess> cur;
                    for (const auto& f : t.factors) cur[f.base] = f.expo;
                    if (first) {
                        minexp = cur;
                        first = false;
                        continue;
                    }
                    for (auto it = minexp.begin(); it != minexp.end();) {
                        auto jt = cur.find(it->first);
                        Rational other = jt == cur.end() ? Rational(0) : jt->second;
                        it->second = std::min(it->second, other);
                        if (it->second == 0) it = minexp.erase(it);
                        else ++it;
                    }
                    for (const auto& [b, ex] : cur)
                        if (ex < 0 && !minexp.count(b)) minexp[b] = ex;
                }
            }
            RatC content(1);
            {
                bool all_real = true;
                for (const auto& t : terms)
                    if (!t.coeff.is_real()) all_real = false;
                if (all_real) {
                    Rational g(0);
                    for (const auto& t : terms) {
                        Rational a = t.coeff.re < 0 ? Rational(-t.coeff.re) : t.coeff.re;
                        g = g == 0 ? a : rational_gcd(g, a);
                    }
                    if (g == 0) g = 1;
                    if (terms.front().coeff.re < 0) g = -g;
                    content = RatC(g);
                } else if (leading_negative(base)) {
                    content = RatC(Rational(-1));
                }
            }
            if (minexp.empty() && content.is_one())
                return make_power_node(base, q);
            std::vector<Expr> reduced;
            for (const auto& t : terms) {
                Term nt;
                nt.coeff = t.coeff / content;
                std::map<Expr, Rational, ExprLess> fe;
                for (const auto& f : t.factors) fe[f.base] = f.expo;
                for (const auto& [b, ex] : minexp) fe[b] -= ex;
                for (const auto& [b, ex] : fe)
                    if (ex != 0) nt.factors.push_back({b, ex});
                sort_factors(nt.factors);
                reduced.push_back(term_build(nt));
            }
            Expr inner = canon_sum(std::move(reduced));
            Expr inner_pow = canon_power(inner, q);
            Term it = term_view(inner_pow);
            RatC coeff = it.coeff;
            std::vector<Factor> all = it.factors;
            {
                Expr cpow = canon_constant_power(content, q);
                Term ct = term_view(cpow);
                coeff *= ct.coeff;
                all.insert(all.end(), ct.factors.begin(), ct.factors.end());
            }
            for (const auto& [b, ex] : minexp) all.push_back({b, Rational(ex * q)});
            return canon_product(coeff, all);
        }
        default:
            if (base->kind == Kind::Func && (base->fn == Fn::Sin || base->fn == Fn::Cos) &&
                is_integer(q) && q > 1 && q <= 64)
                return canon_product(RatC(1), {{base, q}});  // Fourier-reduce trig powers
            return make_power_node(base, q);
    }
}

// --- products -------------------------------------------------------------------

inline Expr canon_product(RatC coeff, std::vector<Factor> work) {
    if (coeff.is_zero()) return zero_expr();

    std::vector<Factor> merged;
    std::vector<std::pair<Expr, Rational>> exp_parts;

    for (std::size_t wi = 0; wi < work.size(); ++wi) {
        Factor f = work[wi];
        if (f.expo == 0) continue;
        switch (f.base->kind) {
            case Kind::Constant: {
                Expr cp = canon_constant_power(f.base->value, f.expo);
                Term t = term_view(cp);
                coeff *= t.coeff;
                for (const auto& tf : t.factors) work.push_back(tf);
                continue;
            }
            case Kind::Power:
                work.push_back({f.base->kids[0], Rational(f.base->expo * f.expo)});
                continue;
            case Kind::Product: {
                Term t = term_view(f.base);
                Expr cpow = canon_constant_power(t.coeff, f.expo);
                Term ct = term_view(cpow);
                coeff *= ct.coeff;
                for (const auto& tf : ct.factors) work.push_back(tf);
                for (const auto& tf : t.factors) work.push_back({tf.base, Rational(tf.expo * f.expo)});
                continue;
            }
            case Kind::Func:
                if (f.base->fn == Fn::Exp) {
                    exp_parts.push_back({f.base->kids[0], f.expo});
                    continue;
                }
                break;
            default:
                break;
        }
        bool found = false;
        for (auto& m : merged) {
            if (expr_eq(m.base, f.base)) {
                m.expo += f.expo;
                found = true;
                break;
            }
        }
        if (!found) merged.push_back(f);
    }
    if (coeff.is_zero()) return zero_expr();

    if (!exp_parts.empty()) {
        std::vector<Expr> arg_parts;
        for (const auto& [arg, w] : exp_parts) {
            for (const auto& k : arg->kind == Kind::Sum ? arg->kids : std::vector<Expr>{arg}) {
                Term kt = term_view(k);
                kt.coeff *= RatC(Rational(w));
                arg_parts.push_back(term_build(kt));
            }
        }
        Expr combined = canon_sum(std::move(arg_parts));
        if (!(combined->kind == Kind::Constant && combined->value.is_zero())) {
            Expr e = make_func_node(Fn::Exp, combined);
            bool found = false;
            for (auto& m : merged)
                if (expr_eq(m.base, e)) { m.expo += 1; found = true; break; }
            if (!found) merged.push_back({e, Rational(1)});
        }
    }

    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Factor& f) { return f.expo == 0; }),
                 merged.end());

    // Fourier-reduce trig factors carried with positive integer exponents
    std::vector<Factor> rest;
    std::vector<std::pair<int, Expr>> trig;
    for (const auto& f : merged) {
        if (f.base->kind == Kind::Func && (f.base->fn == Fn::Sin || f.base->fn == Fn::Cos) &&
            is_integer(f.expo) && f.expo > 0 && f.expo <= 64) {
            long n = to_long(f.expo);
            for (long i = 0; i < n; ++i)
                trig.push_back({f.base->fn == Fn::Sin ? 1 : 2, f.base->kids[0]});
        } else {
            rest.push_back(f);
        }
    }
    if (trig.size() >= 2) {
        std::vector<TrigTerm> fourier{{RatC(1), 0, nullptr}};
        for (const auto& [k, a] : trig) fourier = trig_mul(fourier, k, a);
        std::vector<Expr> parts;
        for (const auto& tt : fourier) {
            std::vector<Factor> fs = rest;
            if (tt.kind != 0)
                fs.push_back({make_func_node(tt.kind == 1 ? Fn::Sin : Fn::Cos, tt.angle), Rational(1)});
            parts.push_back(canon_product(coeff * tt.coeff, fs));
        }
        return canon_sum(std::move(parts));
    }
    if (trig.size() == 1)
        rest.push_back({make_func_node(trig[0].first == 1 ? Fn::Sin : Fn::Cos, trig[0].second), Rational(1)});

    std::vector<Factor> final_factors;
    for (const auto& f : rest) {
        bool found = false;
        for (auto& m : final_factors)
            if (expr_eq(m.base, f.base)) { m.expo += f.expo; found = true; break; }
        if (!found) final_factors.push_back(f);
    }
    final_factors.erase(std::remove_if(final_factors.begin(), final_factors.end(),
                                       [](const Factor& f) { return f.expo == 0; }),
                        final_factors.end());

    // distribute sum factors carrying positive integer exponents
    for (std::size_t i = 0; i < final_factors.size(); ++i) {
        const Factor& f = final_factors[i];
        if (f.base->kind == Kind::Sum && is_integer(f.expo) && f.expo > 0 && f.expo <= 16) {
            Expr expanded = canon_power(f.base, f.expo);
            std::vector<Factor> others;
            for (std::size_t j = 0; j < final_factors.size(); ++j)
                if (j != i) others.push_back(final_factors[j]);
            std::vector<Expr> eterms =
                expanded->kind == Kind::Sum ? expanded->kids : std::vector<Expr>{expanded};
            std::vector<Expr> parts;
            for (const auto& et : eterms) {
                Term t = term_view(et);
                std::vector<Factor> fs = others;
                fs.insert(fs.end(), t.factors.begin(), t.factors.end());
                parts.push_back(canon_product(coeff * t.coeff, fs));
            }
            return canon_sum(std::move(parts));
        }
    }

    sort_factors(final_factors);
    return term_build({coeff, std::move(final_factors)});
}

// --- sums -----------------------------------------------------------------------

inline std::vector<Factor> denom_signature(const Term& t) {
    std::vector<Factor> sig;
    for (const auto& f : t.factors)
        if (f.expo < 0) sig.push_back(f);
    return sig;
}

inline Expr canon_sum(std::vector<Expr> parts) {
    std::vector<Term> terms;
    for (auto& p : parts) {
        if (p->kind == Kind::Sum) {
            for (const auto& k : p->kids) terms.push_back(term_view(k));
        } else {
            Term t = term_view(p);
            if (!t.coeff.is_zero()) terms.push_back(std::move(t));
        }
    }
    std::sort(terms.begin(), terms.end(),
              [](const Term& a, const Term& b) { return cmp_monomial(a.factors, b.factors) < 0; });
    std::vector<Term> merged;
    for (auto& t : terms) {
        if (!merged.empty() && cmp_monomial(merged.back().factors, t.factors) == 0)
            merged.back().coeff += t.coeff;
        else
            merged.push_back(std::move(t));
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Term& t) { return t.coeff.is_zero(); }),
                 merged.end());

    // cancel groups of fractions over a shared compound denominator
    if (merged.size() >= 2) {
        bool changed = false;
        std::vector<Term> out;
        std::vector<bool> used(merged.size(), false);
        for (std::size_t i = 0; i < merged.size(); ++i) {
            if (used[i]) continue;
            std::vector<Factor> sig = denom_signature(merged[i]);
            bool has_compound = false;
            for (const auto& f : sig)
                if (f.base->kind == Kind::Sum) has_compound = true;
            if (!has_compound) {
                out.push_back(merged[i]);
                continue;
            }
            std::vector<std::size_t> group{i};
            for (std::size_t j = i + 1; j < merged.size(); ++j) {
                if (used[j]) continue;
                std::vector<Factor> sj = denom_signature(merged[j]);
                if (sj.size() != sig.size()) continue;
                bool same = true;
                for (std::size_t k = 0; k < sig.size(); ++k)
                    if (cmp_factor(sig[k], sj[k]) != 0) { same = false; break; }
                if (same) group.push_back(j);
            }
            if (group.size() < 2) {
                out.push_back(merged[i]);
                continue;
            }
            std::vector<Term> numer;
            for (std::size_t j : group) {
                Term t = merged[j];
                std::vector<Factor> keep;
                for (const auto& f : t.factors)
                    if (f.expo > 0) keep.push_back(f);
                t.factors = std::move(keep);
                numer.push_back(std::move(t));
            }
            std::vector<Factor> remaining = sig;
            bool any_div = false;
            for (auto& f : remaining) {
                if (f.base->kind != Kind::Sum) continue;
                std::vector<Term> den;
                for (const auto& k : f.base->kids) den.push_back(term_view(k));
                while (f.expo < 0) {
                    auto quo = exact_divide_terms(numer, den);
                    if (!quo) break;
                    numer = std::move(*quo);
                    f.expo += 1;
                    any_div = true;
                }
            }
            std::vector<Term> partial_quot;  // terms with one denominator power peeled off
            std::vector<Factor> partial_sig;
            if (!any_div) {
                // partial extraction against the first compound base:
                // N/D^k = q/D^(k-1) + r/D^k with grlex division-with-remainder
                for (auto& f : remaining) {
                    if (f.base->kind != Kind::Sum) continue;
                    std::vector<Term> den;
                    for (const auto& k : f.base->kids) den.push_back(term_view(k));
                    auto dr = divide_with_remainder_terms(numer, den);
                    if (dr && !dr->quotient.empty()) {
                        partial_sig = remaining;
                        for (auto& pf : partial_sig)
                            if (expr_eq(pf.base, f.base)) { pf.expo += 1; break; }
                        partial_quot = std::move(dr->quotient);
                        numer = std::move(dr->remainder);
                        any_div = true;
                    }
                    break;
                }
            }
            if (!any_div) {
                for (std::size_t j : group) {
                    out.push_back(merged[j]);
                    used[j] = true;
                }
                continue;
            }
            changed = true;
            for (std::size_t j : group) used[j] = true;
            for (auto& t : partial_quot) {
                Term nt = t;
                for (const auto& f : partial_sig)
                    if (f.expo != 0) nt.factors.push_back(f);
                sort_factors(nt.factors);
                out.push_back(std::move(nt));
            }
            for (auto& t : numer) {
                Term nt = t;
                for (const auto& f : remaining)
                    if (f.expo != 0) nt.factors.push_back(f);
                sort_factors(nt.factors);
                out.push_back(std::move(nt));
            }
        }
        if (changed) {
            std::vector<Expr> rebuilt;
            rebuilt.reserve(out.size());
            for (const auto& t : out) rebuilt.push_back(term_build(t));
            return canon_sum(std::move(rebuilt));
        }
        merged = std::move(out);
    }

    if (merged.empty()) return zero_expr();
    if (merged.size() == 1) return term_build(merged[0]);
    std::vector<Expr> kids;
    kids.reserve(merged.size());
    for (const auto& t : merged) kids.push_back(term_build(t));
    auto n = std::make_shared<Node>(Kind::Sum);
    n->kids = std::move(kids);
    return finish(std::move(n), true);
}

inline Expr canon_func(Fn f, const Expr& arg) {
    if (f == Fn::Sqrt) return canon_power(arg, Rational(1, 2));
    if (arg->kind == Kind::Constant) {
        const RatC& v = arg->value;
        if (v.is_zero()) {
            switch (f) {
                case Fn::Sin: return zero_expr();
                case Fn::Cos: return one_expr();
                case Fn::Exp: return one_expr();
                case Fn::Ln: throw Error("ln(0) is undefined");
                default: break;
            }
        }
        if (v.is_one() && f == Fn::Ln) return zero_expr();
    }
    if ((f == Fn::Sin || f == Fn::Cos) && leading_negative(arg)) {
        Expr pos = negate_canonical(arg);
        Expr e = make_func_node(f, pos);
        if (f == Fn::Sin) return canon_product(RatC(Rational(-1)), {{e, Rational(1)}});
        return e;
    }
    return make_func_node(f, arg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Canonicalization entry point
// ---------------------------------------------------------------------------

inline Expr canonicalize(const Expr& e) {
    if (e->canonical) return e;
    switch (e->kind) {
        case Kind::Constant:
        case Kind::Symbol:
            return e;
        case Kind::FuncDeriv: {
            auto n = std::make_shared<Node>(Kind::FuncDeriv);
            n->name = e->name;
            n->deriv_order = e->deriv_order;
            if (!e->kids.empty()) n->kids.push_back(canonicalize(e->kids[0]));
            return detail::finish(std::move(n), true);
        }
        case Kind::Func:
            return detail::canon_func(e->fn, canonicalize(e->kids[0]));
        case Kind::Power:
            return detail::canon_power(canonicalize(e->kids[0]), e->expo);
        case Kind::Product: {
            std::vector<Factor> fs;
            RatC coeff = e->value;
            std::vector<Expr> sums;
            for (const auto& k : e->kids) {
                Expr ck = canonicalize(k);
                if (ck->kind == Kind::Sum) {
                    sums.push_back(ck);
                } else {
                    Term t = term_view(ck);
                    coeff *= t.coeff;
                    for (const auto& f : t.factors) fs.push_back(f);
                }
            }
            Expr base = detail::canon_product(coeff, fs);
            for (const auto& s : sums) {
                std::vector<Expr> bt = base->kind == Kind::Sum ? base->kids : std::vector<Expr>{base};
                std::vector<Expr> parts;
                for (const auto& a : bt)
                    for (const auto& b : s->kids) {
                        Term ta = term_view(a), tb = term_view(b);
                        std::vector<Factor> ff = ta.factors;
                        ff.insert(ff.end(), tb.factors.begin(), tb.factors.end());
                        parts.push_back(detail::canon_product(ta.coeff * tb.coeff, ff));
                    }
                base = detail::canon_sum(std::move(parts));
            }
            return base;
        }
        case Kind::Sum: {
            std::vector<Expr> kids;
            kids.reserve(e->kids.size());
            for (const auto& k : e->kids) kids.push_back(canonicalize(k));
            return detail::canon_sum(std::move(kids));
        }
    }
    throw Error("canonicalize: unreachable");
}

// ---------------------------------------------------------------------------
// Smart constructors (always canonical)
// ---------------------------------------------------------------------------

inline Expr constant(long v) { return raw_constant(RatC(v)); }
inline Expr constant(Rational q) { return raw_constant(RatC(std::move(q))); }
inline Expr constant(RatC c) { return raw_constant(std::move(c)); }
inline Expr imaginary_unit() { return raw_constant(RatC(Rational(0), Rational(1))); }
inline Expr symbol(std::string name) { return raw_symbol(std::move(name)); }
inline Expr deriv_placeholder(std::string name, int order, Expr arg = nullptr) {
    return canonicalize(raw_deriv(std::move(name), order, std::move(arg)));
}

inline Expr add(std::vector<Expr> parts) { return canonicalize(raw_sum(std::move(parts))); }
inline Expr add(Expr a, Expr b) { return add(std::vector<Expr>{std::move(a), std::move(b)}); }
inline Expr neg(const Expr& a) { return canonicalize(raw_product(RatC(Rational(-1)), {a})); }
inline Expr sub(const Expr& a, const Expr& b) { return add(a, neg(b)); }
inline Expr mul(std::vector<Expr> parts) { return canonicalize(raw_product(RatC(1), std::move(parts))); }
inline Expr mul(Expr a, Expr b) { return mul(std::vector<Expr>{std::move(a), std::move(b)}); }
inline Expr pow(const Expr& base, Rational q) { return canonicalize(raw_power(base, std::move(q))); }
inline Expr pow(const Expr& base, long q) { return pow(base, Rational(q)); }
inline Expr div(const Expr& a, const Expr& b) { return mul(a, pow(b, Rational(-1))); }
inline Expr sin(const Expr& a) { return canonicalize(raw_func(Fn::Sin, a)); }
inline Expr cos(const Expr& a) { return canonicalize(raw_func(Fn::Cos, a)); }
inline Expr exp(const Expr& a) { return canonicalize(raw_func(Fn::Exp, a)); }
inline Expr ln(const Expr& a) { return canonicalize(raw_func(Fn::Ln, a)); }
inline Expr sqrt(const Expr& a) { return canonicalize(raw_func(Fn::Sqrt, a)); }

inline bool is_zero(const Expr& e) { return e->kind == Kind::Constant && e->value.is_zero(); }
inline bool is_one(const Expr& e) { return e->kind == Kind::Constant && e->value.is_one(); }

/// Terms of a canonical expression viewed as a sum; zero yields no terms.
inline std::vector<Expr> sum_terms(const Expr& e) {
    if (e->kind == Kind::Sum) return e->kids;
    if (is_zero(e)) return {};
    return {e};
}

/// Free atoms keyed by display name: symbols as-is, derivative placeholders
/// as name followed by primes ("y'", "Om''").
inline void collect_atoms(const Expr& e, std::set<std::string>& out) {
    switch (e->kind) {
        case Kind::Constant: return;
        case Kind::Symbol: out.insert(e->name); return;
        case Kind::FuncDeriv: {
            std::string n = e->name;
            for (int i = 0; i < e->deriv_order; ++i) n += '\'';
            out.insert(n);
            for (const auto& k : e->kids) collect_atoms(k, out);
            return;
        }
        default:
            for (const auto& k : e->kids) collect_atoms(k, out);
    }
}

inline std::set<std::string> free_atoms(const Expr& e) {
    std::set<std::string> s;
    collect_atoms(e, s);
    return s;
}

inline bool contains_symbol(const Expr& e, const std::string& name) {
    switch (e->kind) {
        case Kind::Constant: return false;
        case Kind::Symbol: return e->name == name;
        case Kind::FuncDeriv: {
            std::string n = e->name;
            for (int i = 0; i < e->deriv_order; ++i) n += '\'';
            if (n == name) return true;
            for (const auto& k : e->kids)
                if (contains_symbol(k, name)) return true;
            return false;
        }
        default:
            for (const auto& k : e->kids)
                if (contains_symbol(k, name)) return true;
            return false;
    }
}

}  // namespace cartan
