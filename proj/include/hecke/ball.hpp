#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <algorithm>
#include <cstdio>
#include <string>
#include <utility>

#include "hecke/errors.hpp"

namespace hecke {

/// Default working precision in bits when a caller does not say otherwise.
inline constexpr long kDefaultPrec = 64;

/// Fixed precision of ball radii. Radii are always rounded upward, so a
/// short mantissa costs at most a relative 2^-60 overestimate.
inline constexpr long kRadiusPrec = 64;

namespace detail {

// 1-ulp bound on the rounding error of `mid` after an RNDN operation that
// reported ternary value `t`. Added into `rad` with upward rounding.
inline void add_round_error(mpfr_t rad, const mpfr_t mid, int ternary) {
  if (ternary == 0) return;
  if (mpfr_zero_p(mid)) {
    // Underflow to zero cannot happen above 2^emin.
    mpfr_t tiny;
    mpfr_init2(tiny, 8);
    mpfr_set_ui_2exp(tiny, 1, mpfr_get_emin(), MPFR_RNDU);
    mpfr_add(rad, rad, tiny, MPFR_RNDU);
    mpfr_clear(tiny);
    return;
  }
  mpfr_t ulp;
  mpfr_init2(ulp, 8);
  mpfr_set_ui_2exp(ulp, 1, mpfr_get_exp(mid) - mpfr_get_prec(mid), MPFR_RNDU);
  mpfr_add(rad, rad, ulp, MPFR_RNDU);
  mpfr_clear(ulp);
}

struct MpfrTmp {
  mpfr_t v;
  explicit MpfrTmp(long prec) { mpfr_init2(v, prec); }
  ~MpfrTmp() { mpfr_clear(v); }
  MpfrTmp(const MpfrTmp&) = delete;
  MpfrTmp& operator=(const MpfrTmp&) = delete;
  operator mpfr_ptr() { return v; }
  operator mpfr_srcptr() const { return v; }
  // lets MPFR's function-like macros (mpfr_set, mpfr_sgn, ...) accept a tmp
  mpfr_ptr operator->() { return v; }
  mpfr_srcptr operator->() const { return v; }
};

} // namespace detail

/// Midpoint-radius enclosure of a real number. The represented set is
/// [mid - rad, mid + rad]; every operation returns a ball containing the
/// exact image of its operand sets (inclusion monotonicity). Values are
/// immutable in spirit: nothing mutates an operand, so concurrent reads
/// are safe.
class BallReal {
public:
  explicit BallReal(long prec = kDefaultPrec) {
    mpfr_init2(mid_, std::max<long>(prec, 2));
    mpfr_init2(rad_, kRadiusPrec);
    mpfr_set_zero(mid_, 1);
    mpfr_set_zero(rad_, 1);
  }

  BallReal(const BallReal& o) {
    mpfr_init2(mid_, mpfr_get_prec(o.mid_));
    mpfr_init2(rad_, kRadiusPrec);
    mpfr_set(mid_, o.mid_, MPFR_RNDN);
    mpfr_set(rad_, o.rad_, MPFR_RNDU);
  }

  BallReal(BallReal&& o) noexcept {
    mpfr_init2(mid_, 2);
    mpfr_init2(rad_, 2);
    mpfr_swap(mid_, o.mid_);
    mpfr_swap(rad_, o.rad_);
  }

  BallReal& operator=(const BallReal& o) {
    if (this != &o) {
      mpfr_set_prec(mid_, mpfr_get_prec(o.mid_));
      mpfr_set(mid_, o.mid_, MPFR_RNDN);
      mpfr_set(rad_, o.rad_, MPFR_RNDU);
    }
    return *this;
  }

  BallReal& operator=(BallReal&& o) noexcept {
    mpfr_swap(mid_, o.mid_);
    mpfr_swap(rad_, o.rad_);
    return *this;
  }

  ~BallReal() {
    mpfr_clear(mid_);
    mpfr_clear(rad_);
  }

  // --- constructors from exact values ---

  static BallReal from_long(long v, long prec = kDefaultPrec) {
    BallReal b(std::max<long>(prec, 64));
    mpfr_set_si(b.mid_, v, MPFR_RNDN); // exact: prec >= 64
    return b;
  }

  /// Exact integer as a radius-0 ball; the midpoint precision is grown so
  /// no rounding occurs.
  static BallReal exact_int(const mpz_class& v, long min_prec = kDefaultPrec) {
    long need = std::max<long>(min_prec, (long)mpz_sizeinbase(v.get_mpz_t(), 2) + 2);
    BallReal b(need);
    mpfr_set_z(b.mid_, v.get_mpz_t(), MPFR_RNDN);
    return b;
  }

  static BallReal from_mpq(const mpq_class& v, long prec = kDefaultPrec) {
    BallReal b(prec);
    int t = mpfr_set_q(b.mid_, v.get_mpq_t(), MPFR_RNDN);
    detail::add_round_error(b.rad_, b.mid_, t);
    return b;
  }

  /// Ball from decimal midpoint/radius strings ("1.5e-3"). The parsed ball
  /// contains every real consistent with the strings.
  static BallReal from_decimal(const std::string& mid, const std::string& rad, long prec) {
    BallReal b(prec);
    int t = mpfr_set_str(b.mid_, mid.c_str(), 10, MPFR_RNDN);
    if (t == -1) throw ParseError("bad decimal literal '" + mid + "'");
    // A full ulp covers the decimal->binary conversion of the midpoint.
    mpfr_t one_ulp;
    mpfr_init2(one_ulp, 8);
    if (mpfr_zero_p(b.mid_))
      mpfr_set_zero(one_ulp, 1);
    else
      mpfr_set_ui_2exp(one_ulp, 1, mpfr_get_exp(b.mid_) - prec, MPFR_RNDU);
    mpfr_set(b.rad_, one_ulp, MPFR_RNDU);
    mpfr_clear(one_ulp);
    if (!rad.empty()) {
      detail::MpfrTmp r(kRadiusPrec);
      if (mpfr_set_str(r, rad.c_str(), 10, MPFR_RNDU) == -1)
        throw ParseError("bad decimal literal '" + rad + "'");
      mpfr_nextabove(r); // shield the directed decimal parse
      if (mpfr_sgn((mpfr_srcptr)r) < 0) throw ParseError("negative radius '" + rad + "'");
      mpfr_add(b.rad_, b.rad_, r, MPFR_RNDU);
    }
    return b;
  }

  // --- accessors ---

  long prec() const { return mpfr_get_prec(mid_); }
  mpfr_srcptr mid() const { return mid_; }
  mpfr_srcptr rad() const { return rad_; }
  mpfr_ptr mid_mut() { return mid_; }
  mpfr_ptr rad_mut() { return rad_; }

  bool is_finite() const { return mpfr_number_p(mid_) && mpfr_number_p(rad_); }
  bool is_exact() const { return mpfr_zero_p(rad_); }
  bool contains_zero() const { return mpfr_cmpabs(mid_, rad_) <= 0; }
  /// True when 0 is certainly excluded.
  bool is_nonzero() const { return is_finite() && mpfr_cmpabs(mid_, rad_) > 0; }

  /// Certified sign: +1 / -1 when the whole ball is on one side of 0,
  /// otherwise 0 (which includes "unknown").
  int sign() const {
    if (!is_nonzero()) return 0;
    return mpfr_sgn(mid_);
  }

  /// Lower endpoint, rounded down (outward).
  void get_lower(mpfr_ptr out) const { mpfr_sub(out, mid_, rad_, MPFR_RNDD); }
  /// Upper endpoint, rounded up (outward).
  void get_upper(mpfr_ptr out) const { mpfr_add(out, mid_, rad_, MPFR_RNDU); }

  double lower_d() const {
    detail::MpfrTmp t(64);
    get_lower(t);
    return mpfr_get_d(t, MPFR_RNDD);
  }
  double upper_d() const {
    detail::MpfrTmp t(64);
    get_upper(t);
    return mpfr_get_d(t, MPFR_RNDU);
  }
  double mid_d() const { return mpfr_get_d(mid_, MPFR_RNDN); }
  double rad_d() const { return mpfr_get_d(rad_, MPFR_RNDU); }

  void add_error(mpfr_srcptr r) { mpfr_add(rad_, rad_, r, MPFR_RNDU); }
  void add_error(const BallReal& r) {
    // Accounts for both the magnitude and the uncertainty of r.
    detail::MpfrTmp t(kRadiusPrec);
    mpfr_abs(t, r.mid_, MPFR_RNDU);
    mpfr_add(t, t, r.rad_, MPFR_RNDU);
    mpfr_add(rad_, rad_, t, MPFR_RNDU);
  }
  void add_error_2exp(long e) {
    detail::MpfrTmp t(8);
    mpfr_set_ui_2exp(t, 1, e, MPFR_RNDU);
    mpfr_add(rad_, rad_, t, MPFR_RNDU);
  }

  /// Marks the value unusable: midpoint 0, infinite radius. Downstream
  /// treats this as "retry at higher precision".
  void set_indeterminate() {
    mpfr_set_zero(mid_, 1);
    mpfr_set_inf(rad_, 1);
  }

  // --- containment / comparison ---

  /// Certified containment of an exact rational: rounds the endpoints
  /// inward, so a `true` is rigorous.
  bool contains_rational(const mpq_class& q) const {
    if (!mpfr_number_p(rad_)) return true; // indeterminate = everything
    detail::MpfrTmp lo(prec() + kRadiusPrec), hi(prec() + kRadiusPrec);
    mpfr_sub(lo, mid_, rad_, MPFR_RNDU);
    mpfr_add(hi, mid_, rad_, MPFR_RNDD);
    return mpfr_cmp_q(lo, q.get_mpq_t()) <= 0 && mpfr_cmp_q(hi, q.get_mpq_t()) >= 0;
  }

  bool contains_int(const mpz_class& n) const { return contains_rational(mpq_class(n)); }

  /// True when the whole ball of `a` lies strictly below the whole ball of `b`.
  friend bool certainly_less(const BallReal& a, const BallReal& b) {
    // outward endpoints; strict comparison stays rigorous
    long p = std::max(a.prec(), b.prec()) + kRadiusPrec;
    detail::MpfrTmp ua(p), lb(p);
    mpfr_add(ua, a.mid_, a.rad_, MPFR_RNDU);
    mpfr_sub(lb, b.mid_, b.rad_, MPFR_RNDD);
    return mpfr_cmp(ua, lb) < 0;
  }

  friend bool overlaps(const BallReal& a, const BallReal& b) {
    return !certainly_less(a, b) && !certainly_less(b, a);
  }

  // --- arithmetic (explicit precision) ---

  friend BallReal add(const BallReal& a, const BallReal& b, long prec) {
    BallReal r(prec);
    int t = mpfr_add(r.mid_, a.mid_, b.mid_, MPFR_RNDN);
    mpfr_add(r.rad_, a.rad_, b.rad_, MPFR_RNDU);
    detail::add_round_error(r.rad_, r.mid_, t);
    return r;
  }

  friend BallReal sub(const BallReal& a, const BallReal& b, long prec) {
    BallReal r(prec);
    int t = mpfr_sub(r.mid_, a.mid_, b.mid_, MPFR_RNDN);
    mpfr_add(r.rad_, a.rad_, b.rad_, MPFR_RNDU);
    detail::add_round_error(r.rad_, r.mid_, t);
    return r;
  }

  friend BallReal neg(const BallReal& a) {
    BallReal r(a);
    mpfr_neg(r.mid_, r.mid_, MPFR_RNDN); // exact
    return r;
  }

  friend BallReal mul(const BallReal& a, const BallReal& b, long prec) {
    BallReal r(prec);
    int t = mpfr_mul(r.mid_, a.mid_, b.mid_, MPFR_RNDN);
    // |ma| rb + |mb| ra + ra rb, all upward
    detail::MpfrTmp am(kRadiusPrec), bm(kRadiusPrec), acc(kRadiusPrec);
    mpfr_abs(am, a.mid_, MPFR_RNDU);
    mpfr_abs(bm, b.mid_, MPFR_RNDU);
    mpfr_mul(acc, am, b.rad_, MPFR_RNDU);
    mpfr_add(r.rad_, r.rad_, acc, MPFR_RNDU);
    mpfr_mul(acc, bm, a.rad_, MPFR_RNDU);
    mpfr_add(r.rad_, r.rad_, acc, MPFR_RNDU);
    mpfr_mul(acc, a.rad_, b.rad_, MPFR_RNDU);
    mpfr_add(r.rad_, r.rad_, acc, MPFR_RNDU);
    detail::add_round_error(r.rad_, r.mid_, t);
    return r;
  }

  /// Square with the sharp image interval (tighter than mul(a, a) around 0).
  friend BallReal sqr(const BallReal& a, long prec) {
    detail::MpfrTmp lo(prec + 8), hi(prec + 8);
    a.get_lower(lo);
    a.get_upper(hi);
    detail::MpfrTmp lo_abs(prec + 8), hi_abs(prec + 8);
    mpfr_abs(lo, lo, MPFR_RNDU);
    mpfr_abs(hi, hi, MPFR_RNDU);
    if (mpfr_cmp(lo, hi) > 0) mpfr_swap(lo, hi); // lo <= hi as magnitudes
    if (a.contains_zero()) mpfr_set_zero(lo, 1);
    mpfr_sqr(lo_abs, lo, MPFR_RNDD);
    mpfr_sqr(hi_abs, hi, MPFR_RNDU);
    return from_endpoints(lo_abs, hi_abs, prec);
  }

  friend BallReal div(const BallReal& a, const BallReal& b, long prec) {
    if (!b.is_nonzero())
      throw DivisionByPossibleZero("real denominator ball contains zero");
    BallReal r(prec);
    int t = mpfr_div(r.mid_, a.mid_, b.mid_, MPFR_RNDN);
    // (ra |mb| + rb |ma|) / (|mb| (|mb| - rb))
    detail::MpfrTmp am(kRadiusPrec), bm_lo(kRadiusPrec), bm_up(kRadiusPrec), num(kRadiusPrec),
        den(kRadiusPrec), tmp(kRadiusPrec);
    mpfr_abs(am, a.mid_, MPFR_RNDU);
    mpfr_abs(bm_up, b.mid_, MPFR_RNDU);
    mpfr_abs(bm_lo, b.mid_, MPFR_RNDD);
    mpfr_mul(num, a.rad_, bm_up, MPFR_RNDU);
    mpfr_mul(tmp, b.rad_, am, MPFR_RNDU);
    mpfr_add(num, num, tmp, MPFR_RNDU);
    mpfr_sub(den, bm_lo, b.rad_, MPFR_RNDD);
    mpfr_mul(den, den, bm_lo, MPFR_RNDD);
    mpfr_div(num, num, den, MPFR_RNDU);
    mpfr_add(r.rad_, r.rad_, num, MPFR_RNDU);
    detail::add_round_error(r.rad_, r.mid_, t);
    return r;
  }

  friend BallReal abs_ball(const BallReal& a) {
    BallReal r(a);
    mpfr_abs(r.mid_, r.mid_, MPFR_RNDN);
    if (a.contains_zero()) {
      // fold the interval across 0: [0, |mid|+rad]
      detail::MpfrTmp hi(a.prec() + 8);
      mpfr_add(hi, r.mid_, r.rad_, MPFR_RNDU);
      detail::MpfrTmp lo(8);
      mpfr_set_zero(lo, 1);
      return from_endpoints(lo, hi, a.prec());
    }
    return r;
  }

  friend BallReal exp_ball(const BallReal& a, long prec) {
    if (!a.is_finite()) {
      BallReal r(prec);
      r.set_indeterminate();
      return r;
    }
    detail::MpfrTmp lo(prec + 8), hi(prec + 8);
    a.get_lower(lo);
    a.get_upper(hi);
    detail::MpfrTmp elo(prec), ehi(prec);
    mpfr_exp(elo, lo, MPFR_RNDD);
    mpfr_exp(ehi, hi, MPFR_RNDU);
    if (!mpfr_number_p(ehi)) {
      BallReal r(prec);
      r.set_indeterminate();
      return r;
    }
    return from_endpoints(elo, ehi, prec);
  }

  /// sqrt over the non-negative part of the ball. Any negative slack below 0
  /// is clipped; a ball entirely below 0 is a caller bug.
  friend BallReal sqrt_ball(const BallReal& a, long prec) {
    detail::MpfrTmp lo(prec + 8), hi(prec + 8);
    a.get_lower(lo);
    a.get_upper(hi);
    if (mpfr_sgn((mpfr_srcptr)hi) < 0) throw Error("sqrt_ball: ball entirely negative", 1);
    if (mpfr_sgn((mpfr_srcptr)lo) < 0) mpfr_set_zero(lo, 1);
    detail::MpfrTmp slo(prec), shi(prec);
    mpfr_sqrt(slo, lo, MPFR_RNDD);
    mpfr_sqrt(shi, hi, MPFR_RNDU);
    return from_endpoints(slo, shi, prec);
  }

  /// cos via the Lipschitz-1 bound, clipped to [-1, 1].
  friend BallReal cos_ball(const BallReal& a, long prec) {
    return trig_ball(a, prec, /*is_cos=*/true);
  }
  friend BallReal sin_ball(const BallReal& a, long prec) {
    return trig_ball(a, prec, /*is_cos=*/false);
  }

  friend BallReal pow_ui(const BallReal& a, unsigned long n, long prec) {
    if (n == 0) return from_long(1, prec);
    BallReal acc = from_long(1, prec);
    BallReal base = a;
    bool acc_is_one = true;
    while (n) {
      if (n & 1) {
        acc = acc_is_one ? base : mul(acc, base, prec);
        acc_is_one = false;
      }
      n >>= 1;
      if (n) base = sqr(base, prec);
    }
    return acc;
  }

  friend BallReal mul_2exp(const BallReal& a, long e) {
    BallReal r(a);
    mpfr_mul_2si(r.mid_, r.mid_, e, MPFR_RNDN); // exact
    mpfr_mul_2si(r.rad_, r.rad_, e, MPFR_RNDU);
    return r;
  }

  /// Scale by an exact rational; the radius scales by |q| exactly (up).
  friend BallReal mul_rational(const BallReal& a, const mpq_class& q, long prec) {
    BallReal r(prec);
    int t = mpfr_mul_q(r.mid_, a.mid_, q.get_mpq_t(), MPFR_RNDN);
    detail::MpfrTmp aq(kRadiusPrec);
    mpfr_set_q(aq, q.get_mpq_t(), MPFR_RNDA);
    mpfr_abs(aq, aq, MPFR_RNDU);
    mpfr_mul(r.rad_, a.rad_, aq, MPFR_RNDU);
    detail::add_round_error(r.rad_, r.mid_, t);
    return r;
  }

  /// Round to a (usually lower) working precision, keeping containment.
  friend BallReal round_to(const BallReal& a, long prec) {
    BallReal r(prec);
    int t = mpfr_set(r.mid_, a.mid_, MPFR_RNDN);
    mpfr_set(r.rad_, a.rad_, MPFR_RNDU);
    detail::add_round_error(r.rad_, r.mid_, t);
    return r;
  }

  /// Ball spanning [lo, hi]; endpoints are honored outward.
  static BallReal from_endpoints(mpfr_srcptr lo, mpfr_srcptr hi, long prec) {
    BallReal r(prec);
    int t = mpfr_add(r.mid_, lo, hi, MPFR_RNDN);
    mpfr_div_2ui(r.mid_, r.mid_, 1, MPFR_RNDN); // exact
    detail::MpfrTmp d(kRadiusPrec);
    mpfr_sub(d, hi, lo, MPFR_RNDU);
    mpfr_div_2ui(d, d, 1, MPFR_RNDU);
    mpfr_set(r.rad_, (mpfr_srcptr)d, MPFR_RNDU);
    // the midpoint slack is added for every nondegenerate interval, not only
    // when the addition reported inexact: a coincidentally exact sum at low
    // precision would otherwise yield a smaller radius than the same interval
    // at higher precision, breaking refinement monotonicity
    if (t != 0 || mpfr_cmp(lo, hi) != 0) detail::add_round_error(r.rad_, r.mid_, 1);
    return r;
  }

  // --- operators: precision is the max of the operands' ---

  friend BallReal operator+(const BallReal& a, const BallReal& b) {
    return add(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallReal operator-(const BallReal& a, const BallReal& b) {
    return sub(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallReal operator*(const BallReal& a, const BallReal& b) {
    return mul(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallReal operator/(const BallReal& a, const BallReal& b) {
    return div(a, b, std::max(a.prec(), b.prec()));
  }
  friend BallReal operator-(const BallReal& a) { return neg(a); }

  /// "midpoint +/- radius" in decimal. Parsing the result yields a ball
  /// containing this one; the printed radius absorbs the decimal rounding
  /// of the midpoint, so truncating `digits` never loses containment.
  std::string to_string(int digits = 0) const {
    if (digits <= 0) digits = (int)(prec() * 0.30103) + 2;
    detail::MpfrTmp r(kRadiusPrec);
    mpfr_set(r, rad_, MPFR_RNDU);
    if (!mpfr_zero_p(mid_) && mpfr_number_p(mid_)) {
      // decimal slack: |mid| * 10^(1-digits) >= rounding error of the
      // printed midpoint
      detail::MpfrTmp s(kRadiusPrec);
      mpfr_ui_pow_ui(s, 10, (unsigned long)(digits > 1 ? digits - 1 : 0), MPFR_RNDD);
      mpfr_ui_div(s, 1, s, MPFR_RNDU);
      detail::MpfrTmp m(kRadiusPrec);
      mpfr_abs(m, mid_, MPFR_RNDU);
      mpfr_mul(s, s, m, MPFR_RNDU);
      mpfr_add(r, r, s, MPFR_RNDU);
    }
    char* s = nullptr;
    int n = mpfr_asprintf(&s, "%.*R*e +/- %.3RUe", digits, MPFR_RNDN, mid_, (mpfr_srcptr)r);
    if (n < 0) return "<fmt-error>";
    std::string out(s);
    mpfr_free_str(s);
    return out;
  }

private:
  static BallReal trig_ball(const BallReal& a, long prec, bool is_cos) {
    BallReal r(prec);
    if (!a.is_finite()) {
      r.set_indeterminate();
      return r;
    }
    int t = is_cos ? mpfr_cos(r.mid_, a.mid_, MPFR_RNDN) : mpfr_sin(r.mid_, a.mid_, MPFR_RNDN);
    mpfr_set(r.rad_, a.rad_, MPFR_RNDU); // |d/dx| <= 1
    detail::add_round_error(r.rad_, r.mid_, t);
    // The range never leaves [-1, 1]; clip wide balls.
    detail::MpfrTmp hi(prec + 8), lo(prec + 8);
    r.get_upper(hi);
    r.get_lower(lo);
    bool clip_hi = mpfr_cmp_ui(hi, 1) > 0;
    bool clip_lo = mpfr_cmp_si(lo, -1) < 0;
    if (clip_hi || clip_lo) {
      if (clip_hi) mpfr_set_ui(hi, 1, MPFR_RNDN);
      if (clip_lo) mpfr_set_si(lo, -1, MPFR_RNDN);
      if (mpfr_cmp(lo, hi) > 0) mpfr_swap(lo, hi);
      return from_endpoints(lo, hi, prec);
    }
    return r;
  }

  mpfr_t mid_;
  mpfr_t rad_;
};

inline BallReal pi_ball(long prec) {
  BallReal r(prec);
  int t = mpfr_const_pi(r.mid_mut(), MPFR_RNDN);
  detail::add_round_error(r.rad_mut(), r.mid(), t);
  return r;
}

/// Parse "m +/- r" (the to_string format); plain "m" is also accepted.
inline BallReal parse_ball(const std::string& s, long prec) {
  auto pos = s.find("+/-");
  std::string mid = s.substr(0, pos == std::string::npos ? s.size() : pos);
  std::string rad = pos == std::string::npos ? "" : s.substr(pos + 3);
  auto strip = [](std::string& x) {
    while (!x.empty() && (x.front() == ' ' || x.front() == '\t')) x.erase(x.begin());
    while (!x.empty() && (x.back() == ' ' || x.back() == '\t')) x.pop_back();
  };
  strip(mid);
  strip(rad);
  if (mid.empty()) throw ParseError("empty ball literal");
  return BallReal::from_decimal(mid, rad, prec);
}

} // namespace hecke
