#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace maxcover {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Parses a plain decimal such as "0.25" or "3" into an exact fraction.
// Signs, exponents and anything that is not [0-9]+(\.[0-9]+)? are rejected.
Rational parse_decimal(std::string_view text);

// Shortest exact rendering: "1/4", "3", "0".
std::string to_string(const Rational& r);

double to_double(const Rational& r);

BigInt floor(const Rational& r);
BigInt ceil(const Rational& r);

// Smallest e >= 0 with 2^-e <= r, i.e. r rounded down to a power of 1/2.
// Requires 0 < r <= 1.
int round_down_pow2_exponent(const Rational& r);

}  // namespace maxcover
