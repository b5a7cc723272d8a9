#pragma once

#include <cmath>
#include <type_traits>

namespace altkin {

/// Truncated dual number a + b*eps with eps^2 = 0. Nesting Dual<Dual<double>>
/// gives hyper-dual arithmetic: one evaluation yields a value, two first
/// partials and the mixed second partial.
template <class T>
struct Dual {
  T v{};  // value
  T d{};  // derivative part

  constexpr Dual() = default;
  constexpr Dual(T value) : v(value) {}
  constexpr Dual(T value, T deriv) : v(value), d(deriv) {}
  template <class U = T, std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  constexpr Dual(double value) : v(value) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = v * o.d + d * o.v;
    v = v * o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v = v / o.v;
    return *this;
  }
  Dual operator-() const { return Dual(-v, -d); }
};

using D1 = Dual<double>;
using D2 = Dual<Dual<double>>;

template <class T>
Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T>
Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T>
Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T>
Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }

template <class T>
Dual<T> operator+(Dual<T> a, double s) { return a += Dual<T>(T(s)); }
template <class T>
Dual<T> operator+(double s, Dual<T> a) { return a += Dual<T>(T(s)); }
template <class T>
Dual<T> operator-(Dual<T> a, double s) { return a -= Dual<T>(T(s)); }
template <class T>
Dual<T> operator-(double s, const Dual<T>& a) { return Dual<T>(T(s)) - a; }
template <class T>
Dual<T> operator*(Dual<T> a, double s) { return a *= Dual<T>(T(s)); }
template <class T>
Dual<T> operator*(double s, Dual<T> a) { return a *= Dual<T>(T(s)); }
template <class T>
Dual<T> operator/(Dual<T> a, double s) { return a /= Dual<T>(T(s)); }
template <class T>
Dual<T> operator/(double s, const Dual<T>& a) { return Dual<T>(T(s)) / a; }

/// Innermost real value of an arbitrarily nested dual.
inline double real_part(double x) { return x; }
template <class T>
double real_part(const Dual<T>& x) { return real_part(x.v); }

using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;
using std::tan;

template <class T>
Dual<T> sin(const Dual<T>& x) { return {sin(x.v), x.d * cos(x.v)}; }
template <class T>
Dual<T> cos(const Dual<T>& x) { return {cos(x.v), -(x.d * sin(x.v))}; }
template <class T>
Dual<T> tan(const Dual<T>& x) {
  const T t = tan(x.v);
  return {t, x.d * (t * t + 1.0)};
}
template <class T>
Dual<T> exp(const Dual<T>& x) {
  const T e = exp(x.v);
  return {e, x.d * e};
}
template <class T>
Dual<T> log(const Dual<T>& x) { return {log(x.v), x.d / x.v}; }
template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  const T r = sqrt(x.v);
  return {r, x.d / (2.0 * r)};
}

/// Integer power by binary exponentiation; exact for exact inputs and safe
/// at non-positive bases.
template <class T>
T powi(T base, long long e) {
  if (e < 0) return T(1.0) / powi(base, -e);
  T result(1.0);
  while (e > 0) {
    if (e & 1) result = result * base;
    base = base * base;
    e >>= 1;
  }
  return result;
}

/// General power via exp(y log x); requires a positive base.
template <class T>
T pow_general(const T& x, const T& y) {
  return exp(y * log(x));
}
inline double pow_general(double x, double y) { return std::pow(x, y); }

}  // namespace altkin
