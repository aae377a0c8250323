#pragma once

#include <string>
#include <utility>

#include "hecke/ball.hpp"

namespace hecke {

/// Rectangular complex enclosure: independent real and imaginary balls.
/// Rectangles are not the tightest complex enclosures, but every operation
/// below is inclusion monotone, which is all the evaluator needs.
class BallComplex {
public:
  BallComplex() = default;
  explicit BallComplex(long prec) : re_(prec), im_(prec) {}
  BallComplex(BallReal re, BallReal im) : re_(std::move(re)), im_(std::move(im)) {}

  static BallComplex from_real(BallReal re) {
    long p = re.prec();
    return BallComplex(std::move(re), BallReal(p));
  }
  static BallComplex from_long(long re, long im, long prec = kDefaultPrec) {
    return BallComplex(BallReal::from_long(re, prec), BallReal::from_long(im, prec));
  }
  static BallComplex from_mpq(const mpq_class& re, const mpq_class& im, long prec) {
    return BallComplex(BallReal::from_mpq(re, prec), BallReal::from_mpq(im, prec));
  }

  const BallReal& re() const { return re_; }
  const BallReal& im() const { return im_; }
  BallReal& re_mut() { return re_; }
  BallReal& im_mut() { return im_; }

  long prec() const { return std::max(re_.prec(), im_.prec()); }
  bool is_finite() const { return re_.is_finite() && im_.is_finite(); }
  bool contains_zero() const { return re_.contains_zero() && im_.contains_zero(); }
  /// 0 is certainly not in the rectangle.
  bool is_nonzero() const { return re_.is_nonzero() || im_.is_nonzero(); }

  void set_indeterminate() {
    re_.set_indeterminate();
    im_.set_indeterminate();
  }

  friend BallComplex add(const BallComplex& a, const BallComplex& b, long prec) {
    return {add(a.re_, b.re_, prec), add(a.im_, b.im_, prec)};
  }
  friend BallComplex sub(const BallComplex& a, const BallComplex& b, long prec) {
    return {sub(a.re_, b.re_, prec), sub(a.im_, b.im_, prec)};
  }
  friend BallComplex neg(const BallComplex& a) { return {neg(a.re_), neg(a.im_)}; }
  friend BallComplex conj(const BallComplex& a) { return {a.re_, neg(a.im_)}; }

  friend BallComplex mul(const BallComplex& a, const BallComplex& b, long prec) {
    BallReal ac = mul(a.re_, b.re_, prec);
    BallReal bd = mul(a.im_, b.im_, prec);
    BallReal ad = mul(a.re_, b.im_, prec);
    BallReal bc = mul(a.im_, b.re_, prec);
    return {sub(ac, bd, prec), add(ad, bc, prec)};
  }

  /// z^2 with sharp real squares on the diagonal terms.
  friend BallComplex csqr(const BallComplex& a, long prec) {
    BallReal a2 = sqr(a.re_, prec);
    BallReal b2 = sqr(a.im_, prec);
    BallReal cross = mul(a.re_, a.im_, prec);
    return {sub(a2, b2, prec), mul_2exp(cross, 1)};
  }

  /// |z|^2 as a ball (sharp squares, so the lower endpoint is usable for
  /// zero exclusion).
  friend BallReal norm_sqr(const BallComplex& a, long prec) {
    return add(sqr(a.re_, prec), sqr(a.im_, prec), prec);
  }

  /// x / y. Throws DivisionByPossibleZero unless |y| is certainly positive.
  friend BallComplex safe_div(const BallComplex& x, const BallComplex& y, long prec) {
    BallReal den = norm_sqr(y, prec);
    if (!den.is_nonzero() || den.sign() <= 0)
      throw DivisionByPossibleZero("complex denominator rectangle contains zero");
    BallComplex num = mul(x, conj(y), prec);
    return {div(num.re_, den, prec), div(num.im_, den, prec)};
  }

  friend BallComplex inv(const BallComplex& y, long prec) {
    return safe_div(from_long(1, 0, prec), y, prec);
  }

  friend BallComplex pow_si(const BallComplex& a, long n, long prec) {
    if (n < 0) return inv(pow_si(a, -n, prec), prec);
    if (n == 0) return from_long(1, 0, prec);
    BallComplex acc;
    BallComplex base = a;
    bool acc_set = false;
    unsigned long m = (unsigned long)n;
    while (m) {
      if (m & 1) {
        acc = acc_set ? mul(acc, base, prec) : base;
        acc_set = true;
      }
      m >>= 1;
      if (m) base = csqr(base, prec);
    }
    return acc;
  }

  friend BallComplex mul_rational(const BallComplex& a, const mpq_class& q, long prec) {
    return {mul_rational(a.re_, q, prec), mul_rational(a.im_, q, prec)};
  }
  friend BallComplex mul_real(const BallComplex& a, const BallReal& s, long prec) {
    return {mul(a.re_, s, prec), mul(a.im_, s, prec)};
  }
  /// i * z, exact.
  friend BallComplex mul_i(const BallComplex& a) { return {neg(a.im_), a.re_}; }

  friend BallComplex round_to(const BallComplex& a, long prec) {
    return {round_to(a.re_, prec), round_to(a.im_, prec)};
  }

  /// exp(x+iy) = e^x (cos y + i sin y), each factor by its own rigorous rule.
  friend BallComplex complex_exp(const BallComplex& z, long prec) {
    BallReal r = exp_ball(z.re_, prec);
    return {mul(r, cos_ball(z.im_, prec), prec), mul(r, sin_ball(z.im_, prec), prec)};
  }

  /// Certified bounds lo <= |z| <= hi over the rectangle: exact (radius-0)
  /// balls whose midpoints are outward-rounded, so lo.mid <= |z| <= hi.mid
  /// holds for every point z of the rectangle.
  friend std::pair<BallReal, BallReal> abs_bounds(const BallComplex& z, long prec) {
    detail::MpfrTmp xl(prec + 8), xu(prec + 8), yl(prec + 8), yu(prec + 8);
    z.re_.get_lower(xl);
    z.re_.get_upper(xu);
    z.im_.get_lower(yl);
    z.im_.get_upper(yu);
    // nearest |x| over [xl, xu]: 0 if it straddles 0
    detail::MpfrTmp xmin(prec + 8), xmax(prec + 8), ymin(prec + 8), ymax(prec + 8);
    auto split = [](mpfr_ptr mn, mpfr_ptr mx, mpfr_srcptr lo, mpfr_srcptr hi) {
      if (mpfr_sgn(lo) <= 0 && mpfr_sgn(hi) >= 0) {
        mpfr_set_zero(mn, 1);
      } else {
        mpfr_abs(mn, lo, MPFR_RNDD);
        detail::MpfrTmp t(mpfr_get_prec(mn));
        mpfr_abs(t, hi, MPFR_RNDD);
        if (mpfr_cmp(t, mn) < 0) mpfr_set(mn, t, MPFR_RNDD);
      }
      mpfr_abs(mx, lo, MPFR_RNDU);
      detail::MpfrTmp t(mpfr_get_prec(mx));
      mpfr_abs(t, hi, MPFR_RNDU);
      if (mpfr_cmp(t, mx) > 0) mpfr_set(mx, t, MPFR_RNDU);
    };
    split(xmin, xmax, xl, xu);
    split(ymin, ymax, yl, yu);
    detail::MpfrTmp lo2(prec + 8), hi2(prec + 8), t(prec + 8);
    mpfr_sqr(lo2, xmin, MPFR_RNDD);
    mpfr_sqr(t, ymin, MPFR_RNDD);
    mpfr_add(lo2, lo2, t, MPFR_RNDD);
    mpfr_sqrt(lo2, lo2, MPFR_RNDD);
    mpfr_sqr(hi2, xmax, MPFR_RNDU);
    mpfr_sqr(t, ymax, MPFR_RNDU);
    mpfr_add(hi2, hi2, t, MPFR_RNDU);
    mpfr_sqrt(hi2, hi2, MPFR_RNDU);
    BallReal lo(prec), hi(prec);
    int tl = mpfr_set(lo.mid_mut(), lo2, MPFR_RNDD);
    (void)tl; // rounded down: still a valid lower bound
    int th = mpfr_set(hi.mid_mut(), hi2, MPFR_RNDU);
    (void)th;
    return {lo, hi};
  }

  friend BallComplex operator+(const BallComplex& a, const BallComplex& b) {
    return add(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallComplex operator-(const BallComplex& a, const BallComplex& b) {
    return sub(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallComplex operator*(const BallComplex& a, const BallComplex& b) {
    return mul(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallComplex operator-(const BallComplex& a) { return neg(a); }

  std::string to_string(int digits = 0) const {
    return "(" + re_.to_string(digits) + ") + (" + im_.to_string(digits) + ")*I";
  }

private:
  BallReal re_{kDefaultPrec};
  BallReal im_{kDefaultPrec};
};

} // namespace hecke
