#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>

#include <complex>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cartan {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt rat_num(const Rational& q) { return boost::multiprecision::numerator(q); }
inline BigInt rat_den(const Rational& q) { return boost::multiprecision::denominator(q); }

inline bool is_integer(const Rational& q) { return rat_den(q) == 1; }

inline long to_long(const Rational& q) {
    if (!is_integer(q)) throw std::logic_error("to_long: not an integer rational");
    return static_cast<long>(rat_num(q));
}

inline double to_double(const Rational& q) { return static_cast<double>(q); }

/// Exact rational equal to the IEEE double (every finite double is rational).
inline Rational rational_from_double(double d) {
    if (d != d || d - d != 0.0) throw std::domain_error("rational_from_double: non-finite value");
    if (d == 0.0) return Rational(0);
    int expo = 0;
    double m = std::frexp(d, &expo);  // m in [0.5, 1)
    long long scaled = static_cast<long long>(std::ldexp(m, 53));
    Rational r(scaled);
    int shift = expo - 53;
    BigInt two_pow = 1;
    for (int i = 0; i < (shift < 0 ? -shift : shift); ++i) two_pow *= 2;
    if (shift >= 0) r *= Rational(two_pow);
    else r /= Rational(two_pow);
    return r;
}

/// Exact integer power with rational result (negative exponents allowed).
inline Rational rat_pow(const Rational& base, long e) {
    if (e == 0) return Rational(1);
    if (base == 0 && e < 0) throw std::domain_error("rat_pow: zero to negative power");
    Rational b = base;
    bool neg = e < 0;
    unsigned long n = neg ? static_cast<unsigned long>(-e) : static_cast<unsigned long>(e);
    Rational acc(1);
    while (n) {
        if (n & 1) acc *= b;
        b *= b;
        n >>= 1;
    }
    if (neg) acc = Rational(1) / acc;
    return acc;
}

/// Floor of the exact k-th root of a nonnegative integer; sets exact=true when n is a perfect power.
inline BigInt iroot(const BigInt& n, unsigned k, bool& exact) {
    exact = false;
    if (n < 0) throw std::domain_error("iroot: negative argument");
    if (n == 0 || n == 1 || k == 1) {
        exact = true;
        return n;
    }
    BigInt lo = 0, hi = n;
    while (lo < hi) {
        BigInt mid = (lo + hi + 1) / 2;
        BigInt p = 1;
        bool over = false;
        for (unsigned i = 0; i < k; ++i) {
            p *= mid;
            if (p > n) { over = true; break; }
        }
        if (over) hi = mid - 1; else lo = mid;
    }
    BigInt p = 1;
    for (unsigned i = 0; i < k; ++i) p *= lo;
    exact = (p == n);
    return lo;
}

/// Exact complex number with rational real and imaginary parts.
/// The imaginary unit is a first-class constant: RatC(0, 1).
struct RatC {
    Rational re, im;

    RatC() : re(0), im(0) {}
    RatC(long v) : re(v), im(0) {}
    RatC(Rational r) : re(std::move(r)), im(0) {}
    RatC(Rational r, Rational i) : re(std::move(r)), im(std::move(i)) {}

    bool is_zero() const { return re == 0 && im == 0; }
    bool is_one() const { return re == 1 && im == 0; }
    bool is_real() const { return im == 0; }

    friend RatC operator+(const RatC& a, const RatC& b) { return RatC(Rational(a.re + b.re), Rational(a.im + b.im)); }
    friend RatC operator-(const RatC& a, const RatC& b) { return RatC(Rational(a.re - b.re), Rational(a.im - b.im)); }
    friend RatC operator-(const RatC& a) { return RatC(Rational(-a.re), Rational(-a.im)); }
    friend RatC operator*(const RatC& a, const RatC& b) {
        return RatC(Rational(a.re * b.re - a.im * b.im), Rational(a.re * b.im + a.im * b.re));
    }
    friend RatC operator/(const RatC& a, const RatC& b) {
        Rational d = b.re * b.re + b.im * b.im;
        if (d == 0) throw std::domain_error("RatC: division by zero");
        return RatC(Rational((a.re * b.re + a.im * b.im) / d), Rational((a.im * b.re - a.re * b.im) / d));
    }
    RatC& operator+=(const RatC& o) { *this = *this + o; return *this; }
    RatC& operator*=(const RatC& o) { *this = *this * o; return *this; }

    friend bool operator==(const RatC& a, const RatC& b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(const RatC& a, const RatC& b) { return !(a == b); }

    RatC pow_int(long e) const {
        if (e == 0) return RatC(1);
        if (is_zero()) {
            if (e < 0) throw std::domain_error("RatC: zero to negative power");
            return RatC(0);
        }
        RatC b = *this;
        bool neg = e < 0;
        unsigned long n = neg ? static_cast<unsigned long>(-e) : static_cast<unsigned long>(e);
        RatC acc(1);
        while (n) {
            if (n & 1) acc = acc * b;
            b = b * b;
            n >>= 1;
        }
        if (neg) acc = RatC(1) / acc;
        return acc;
    }

    std::complex<double> to_complex() const { return {to_double(re), to_double(im)}; }
};

inline int cmp_rational(const Rational& a, const Rational& b) {
    if (a < b) return -1;
    if (b < a) return 1;
    return 0;
}

inline int cmp_ratc(const RatC& a, const RatC& b) {
    if (int c = cmp_rational(a.re, b.re)) return c;
    return cmp_rational(a.im, b.im);
}

inline std::string rat_to_string(const Rational& q) {
    std::ostringstream os;
    os << q;
    return os.str();
}

inline std::size_t hash_combine(std::size_t seed, std::size_t v) {
    return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

inline std::size_t hash_rational(const Rational& q) {
    // double image is collision-prone for huge values only; equality is always structural
    return std::hash<double>{}(static_cast<double>(q));
}

inline std::size_t hash_ratc(const RatC& c) {
    return hash_combine(hash_rational(c.re), hash_rational(c.im));
}

}  // namespace cartan
