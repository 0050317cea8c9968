#ifndef HVF_RATIONAL_HPP
#define HVF_RATIONAL_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

namespace hvf {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) { return static_cast<double>(r); }

// Every finite double is a dyadic rational; the conversion is exact.
inline Rational rational_from_double(double x) { return Rational(x); }

inline std::string rational_to_string(const Rational& r) {
  std::string s = numerator(r).str();
  if (denominator(r) != 1) s += "/" + denominator(r).str();
  return s;
}

}  // namespace hvf

#endif
