#pragma once

namespace pseudoreg {

/// Truncated two-direction Taylor jet: a + b*e + c*h + d*e*h with e^2 = h^2 = 0.
///
/// Pushing a function through Jet arithmetic with inputs seeded along two
/// directions yields the value, both first directional derivatives and the
/// mixed second derivative exactly (up to rounding). Seeding both directions
/// identically gives the second derivative along that direction.
template <class Real = double>
struct Jet {
  Real v{};   // value
  Real de{};  // d/de
  Real dh{};  // d/dh
  Real deh{}; // d^2/(de dh)

  constexpr Jet() = default;
  constexpr Jet(Real value) : v(value) {}  // NOLINT: implicit lift of constants
  constexpr Jet(Real value, Real e, Real h, Real eh) : v(value), de(e), dh(h), deh(eh) {}

  constexpr Jet& operator+=(const Jet& o) {
    v += o.v;
    de += o.de;
    dh += o.dh;
    deh += o.deh;
    return *this;
  }
  constexpr Jet& operator-=(const Jet& o) {
    v -= o.v;
    de -= o.de;
    dh -= o.dh;
    deh -= o.deh;
    return *this;
  }
  constexpr Jet& operator*=(const Jet& o) { return *this = *this * o; }
  constexpr Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend constexpr Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend constexpr Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend constexpr Jet operator-(const Jet& a) { return {-a.v, -a.de, -a.dh, -a.deh}; }

  friend constexpr Jet operator*(const Jet& a, const Jet& b) {
    return {a.v * b.v, a.v * b.de + a.de * b.v, a.v * b.dh + a.dh * b.v,
            a.v * b.deh + (a.de * b.dh + a.dh * b.de) + a.deh * b.v};
  }

  friend constexpr Jet operator/(const Jet& a, const Jet& b) {
    // a * (1/b) with 1/b expanded to second order.
    const Real r = Real(1) / b.v;
    const Real r2 = r * r;
    const Jet inv{r, -b.de * r2, -b.dh * r2, Real(2) * (b.de * b.dh) * r2 * r - b.deh * r2};
    return a * inv;
  }
};

/// Real arithmetic has the same interface as Jet for the generic evaluators.
inline double value_of(double x) { return x; }
template <class Real>
Real value_of(const Jet<Real>& x) {
  return x.v;
}

}  // namespace pseudoreg
