#include "maxcover/rational.hpp"

#include <cctype>

#include "maxcover/errors.hpp"

namespace maxcover {

Rational parse_decimal(std::string_view text) {
  if (text.empty()) throw ValidationError("empty number");
  BigInt numerator = 0;
  BigInt denominator = 1;
  bool seen_point = false;
  bool digits_before = false;
  bool digits_after = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_point) throw ValidationError("malformed decimal '" + std::string(text) + "'");
      seen_point = true;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ValidationError("malformed decimal '" + std::string(text) + "'");
    }
    numerator = numerator * 10 + (c - '0');
    if (seen_point) {
      denominator *= 10;
      digits_after = true;
    } else {
      digits_before = true;
    }
  }
  if (!digits_before || (seen_point && !digits_after)) {
    throw ValidationError("malformed decimal '" + std::string(text) + "'");
  }
  return Rational(numerator, denominator);
}

std::string to_string(const Rational& r) {
  const BigInt num = boost::multiprecision::numerator(r);
  const BigInt den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

BigInt floor(const Rational& r) {
  const BigInt num = boost::multiprecision::numerator(r);
  const BigInt den = boost::multiprecision::denominator(r);
  BigInt q = num / den;  // truncates toward zero
  if (num < 0 && q * den != num) q -= 1;
  return q;
}

BigInt ceil(const Rational& r) { return -floor(-r); }

int round_down_pow2_exponent(const Rational& r) {
  if (r <= 0 || r > 1) throw ValidationError("expected 0 < value <= 1, got " + to_string(r));
  int e = 0;
  Rational p = 1;
  while (p > r) {
    p /= 2;
    ++e;
  }
  return e;
}

}  // namespace maxcover
