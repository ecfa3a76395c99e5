#pragma once

// Weight arithmetic for measures: IEEE doubles, or exact rationals for
// desk-scale fixtures.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdio>
#include <string>

#include "flatlab/core.hpp"

namespace flatlab {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

template <class W>
struct weight_traits;

template <>
struct weight_traits<double> {
    static constexpr bool exact = false;
    static double to_double(double w) { return w; }
    static double from_double(double w) { return w; }
    // Tolerance for mass bookkeeping comparisons.
    static constexpr double slack = 1e-9;
};

template <>
struct weight_traits<Rational> {
    static constexpr bool exact = true;
    static double to_double(const Rational& w) { return static_cast<double>(w); }
    static Rational from_double(double w) {
        // Exact binary expansion of the double.
        int e = 0;
        double f = std::frexp(w, &e);
        auto mant = static_cast<std::int64_t>(std::ldexp(f, 53));
        Rational r(mant);
        e -= 53;
        BigInt p = BigInt(1) << std::abs(e);
        return e >= 0 ? r * Rational(p) : r / Rational(p);
    }
    static constexpr double slack = 0.0;
};

template <class W>
double to_double(const W& w) {
    return weight_traits<W>::to_double(w);
}

/// Parses "0.25", "1/4", "3", "-1.5e-3" (the exponent form only for doubles
/// of finite decimal expansion).
namespace detail {
// cpp_int reads a leading 0 as octal, so feed it canonical decimal digits.
inline BigInt decimal_integer(std::string t, const std::string& whole) {
    bool neg = false;
    if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
        neg = t[0] == '-';
        t.erase(0, 1);
    }
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
        throw validation_error("malformed number '" + whole + "'");
    const auto nz = t.find_first_not_of('0');
    BigInt v(nz == std::string::npos ? std::string("0") : t.substr(nz));
    return neg ? BigInt(-v) : v;
}
}  // namespace detail

inline Rational parse_rational(const std::string& s) {
    if (s.empty()) throw validation_error("empty rational string");
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        BigInt n = detail::decimal_integer(s.substr(0, slash), s);
        BigInt d = detail::decimal_integer(s.substr(slash + 1), s);
        if (d == 0) throw validation_error("zero denominator in '" + s + "'");
        return Rational(n, d);
    }
    std::string mant = s;
    long exp10 = 0;
    auto epos = mant.find_first_of("eE");
    if (epos != std::string::npos) {
        exp10 = std::stol(mant.substr(epos + 1));
        mant = mant.substr(0, epos);
    }
    bool neg = false;
    if (!mant.empty() && (mant[0] == '-' || mant[0] == '+')) {
        neg = mant[0] == '-';
        mant = mant.substr(1);
    }
    auto dot = mant.find('.');
    std::string digits = mant;
    if (dot != std::string::npos) {
        exp10 -= static_cast<long>(mant.size() - dot - 1);
        digits = mant.substr(0, dot) + mant.substr(dot + 1);
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
        throw validation_error("malformed number '" + s + "'");
    BigInt n = detail::decimal_integer(digits, s);
    BigInt p = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::labs(exp10)));
    Rational r = exp10 >= 0 ? Rational(n * p) : Rational(n, p);
    return neg ? -r : r;
}

/// Exact decimal string when the denominator is of the form 2^a 5^b,
/// otherwise "p/q".
inline std::string format_rational(const Rational& r) {
    BigInt num = boost::multiprecision::numerator(r);
    BigInt den = boost::multiprecision::denominator(r);
    BigInt d = den;
    unsigned twos = 0, fives = 0;
    while (d % 2 == 0) { d /= 2; ++twos; }
    while (d % 5 == 0) { d /= 5; ++fives; }
    if (d != 1) return num.str() + "/" + den.str();
    unsigned digits = std::max(twos, fives);
    // num/den = num * 10^digits / den / 10^digits, and den divides 10^digits.
    BigInt scaled = num * boost::multiprecision::pow(BigInt(10), digits) / den;
    bool neg = scaled < 0;
    if (neg) scaled = -scaled;
    std::string s = scaled.str();
    if (digits > 0) {
        if (s.size() <= digits) s.insert(0, digits - s.size() + 1, '0');
        s.insert(s.size() - digits, ".");
    }
    return neg ? "-" + s : s;
}

/// Shortest round-trip decimal for a double.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace flatlab
