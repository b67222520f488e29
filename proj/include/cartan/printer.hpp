#pragma once

#include <sstream>
#include <string>

#include "cartan/expr.hpp"

namespace cartan {

/// Deterministic pretty-printer. Output re-parses to the same canonical
/// expression (parse . print is the identity on canonical values); this is
/// also the format used in reports and error messages.
///
/// Conventions: rationals as p/q, the imaginary unit as i, powers with ^,
/// x^(1/2) rendered as sqrt(x).
namespace printer_detail {

inline void print_expr(std::ostream& os, const Expr& e, int parent_prec);

// precedence: 0 sum, 1 product, 2 unary minus handled at term level, 3 power, 4 atom
inline void print_ratc(std::ostream& os, const RatC& v, int parent_prec) {
    bool need_paren = false;
    std::ostringstream tmp;
    if (v.im == 0) {
        if (v.re < 0 && parent_prec >= 1) need_paren = true;
        tmp << v.re;
    } else if (v.re == 0) {
        if (v.im == 1) tmp << "i";
        else if (v.im == -1) { tmp << "-i"; if (parent_prec >= 1) need_paren = true; }
        else {
            tmp << v.im << "*i";
            need_paren = parent_prec >= 1;
        }
    } else {
        tmp << v.re << (v.im < 0 ? " - " : " + ");
        Rational ai = v.im < 0 ? Rational(-v.im) : v.im;
        if (ai == 1) tmp << "i"; else tmp << ai << "*i";
        need_paren = parent_prec >= 1;
    }
    std::string s = tmp.str();
    // a/b already prints with '/', needs parens under products/powers
    if (!need_paren && parent_prec >= 1 && s.find('/') != std::string::npos) need_paren = true;
    if (need_paren) os << '(' << s << ')';
    else os << s;
}

inline void print_factor(std::ostream& os, const Expr& base, const Rational& expo) {
    if (expo == 1) {
        print_expr(os, base, 1);
        return;
    }
    if (expo == Rational(1, 2)) {
        os << "sqrt(";
        print_expr(os, base, 0);
        os << ')';
        return;
    }
    print_expr(os, base, 3);
    os << '^';
    if (is_integer(expo) && expo >= 0) {
        os << expo;
    } else {
        os << '(' << expo << ')';
    }
}

inline void print_term(std::ostream& os, const Term& t) {
    // prints |coeff| * factors; sign handled by the caller
    RatC c = t.coeff;
    bool coeff_is_one = c.is_one();
    if (t.factors.empty()) {
        print_ratc(os, c, 1);
        return;
    }
    bool first = true;
    if (!coeff_is_one) {
        print_ratc(os, c, 1);
        first = false;
    }
    for (const auto& f : t.factors) {
        if (!first) os << '*';
        print_factor(os, f.base, f.expo);
        first = false;
    }
}

inline bool term_negative(const Term& t) {
    if (t.coeff.re != 0) return t.coeff.re < 0;
    return t.coeff.im < 0;
}

inline Term term_abs(Term t) {
    if (term_negative(t)) t.coeff = -t.coeff;
    return t;
}

inline void print_expr(std::ostream& os, const Expr& e, int parent_prec) {
    switch (e->kind) {
        case Kind::Constant:
            print_ratc(os, e->value, parent_prec);
            return;
        case Kind::Symbol:
            os << e->name;
            return;
        case Kind::FuncDeriv: {
            os << e->name;
            for (int i = 0; i < e->deriv_order; ++i) os << '\'';
            if (!e->kids.empty()) {
                os << '(';
                print_expr(os, e->kids[0], 0);
                os << ')';
            }
            return;
        }
        case Kind::Func: {
            os << fn_name(e->fn) << '(';
            print_expr(os, e->kids[0], 0);
            os << ')';
            return;
        }
        case Kind::Power: {
            bool need_paren = parent_prec > 3;
            if (need_paren) os << '(';
            print_factor(os, e->kids[0], e->expo);
            if (need_paren) os << ')';
            return;
        }
        case Kind::Product: {
            Term t = term_view(e);
            bool negative = term_negative(t);
            bool need_paren = parent_prec >= 1 || (negative && parent_prec >= 1);
            if (parent_prec >= 3) need_paren = true;
            if (parent_prec == 0) need_paren = false;
            if (need_paren) os << '(';
            if (negative) os << '-';
            print_term(os, term_abs(t));
            if (need_paren) os << ')';
            return;
        }
        case Kind::Sum: {
            bool need_paren = parent_prec >= 1;
            if (need_paren) os << '(';
            bool first = true;
            for (const auto& k : e->kids) {
                Term t = term_view(k);
                bool negative = term_negative(t);
                if (first) {
                    if (negative) os << '-';
                } else {
                    os << (negative ? " - " : " + ");
                }
                print_term(os, term_abs(t));
                first = false;
            }
            if (need_paren) os << ')';
            return;
        }
    }
}

}  // namespace printer_detail

inline std::string to_string(const Expr& e) {
    std::ostringstream os;
    printer_detail::print_expr(os, e, 0);
    return os.str();
}

}  // namespace cartan
