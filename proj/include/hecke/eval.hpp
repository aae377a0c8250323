#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hecke/ball.hpp"
#include "hecke/ball_complex.hpp"
#include "hecke/eigenform.hpp"

namespace hecke {

/// A point of the upper half plane as a rectangle that certifiably stays
/// above the real axis.  When the coordinates are exact rationals they are
/// carried along, so evaluation passes can rebuild the rectangle at any
/// working precision: without that, the radius of the input point puts a
/// floor under the achievable output radius (the image of the rectangle
/// under f is what gets enclosed), which becomes fatal at high weight where
/// |f'| is astronomically large.
struct EvalPoint {
  BallComplex z;
  std::optional<std::pair<mpq_class, mpq_class>> exact; // (re, im) when known

  /// The rectangle at the requested precision; rebuilt from the exact
  /// coordinates when they are available.
  BallComplex at_prec(long prec) const {
    if (exact)
      return BallComplex(BallReal::from_mpq(exact->first, prec),
                         BallReal::from_mpq(exact->second, prec));
    return round_to(z, prec);
  }
};

inline EvalPoint make_eval_point(BallComplex z) {
  detail::MpfrTmp lo(z.prec() + 8);
  z.im().get_lower(lo);
  if (mpfr_sgn((mpfr_srcptr)lo) <= 0)
    throw NonPositiveImaginaryPart("evaluation point must lie strictly above the real axis");
  return EvalPoint{std::move(z), std::nullopt};
}

inline EvalPoint make_eval_point(const mpq_class& re, const mpq_class& im,
                                 long prec = kDefaultPrec) {
  if (im <= 0)
    throw NonPositiveImaginaryPart("evaluation point must lie strictly above the real axis");
  return EvalPoint{BallComplex(BallReal::from_mpq(re, prec), BallReal::from_mpq(im, prec)),
                   std::make_pair(re, im)};
}

/// Atkin-Lehner eigenvalue of W_N on a level-N newform. `certified` means
/// the dual evaluation separated the two sign candidates rigorously.
struct AtkinLehnerSign {
  long level = 1;
  int sign = 1;
  bool certified = true; // trivially true for level 1 (W_1 = id)
};

/// Everything needed to evaluate a form at a reduced point:
/// f(original) = factor * sign^{used_wN} * f(reduced_point).
struct EvalPlan {
  EvalPoint reduced_point;
  BallComplex factor;
  bool used_wN = false;
  long truncation = 0;
  BallReal tail_bound;
};

/// Exponent in the coefficient bound |a_n| <= n^d backing the tail estimate.
inline long truncation_d(long k) { return (k % 2) ? (k + 1) / 2 : (k + 2) / 2; }

/// Coefficient growth profile |a_n| <= C * n^D; the cusp-form instance is
/// C = 1, D = truncation_d(k).
struct TailProfile {
  mpq_class C = 1;
  long D = 2;
};

inline TailProfile cusp_tail_profile(long k) { return {mpq_class(1), truncation_d(k)}; }

/// For E_k: |a_n| = (2k/|B_k|) sigma_{k-1}(n) and sigma_{k-1}(n) <=
/// zeta(k-1) n^{k-1} <= zeta(3) n^{k-1}; 1.2021 over-approximates zeta(3).
inline TailProfile eisenstein_tail_profile(long k) {
  mpq_class c = mpq_class(2 * k) / abs(bernoulli(k)) * mpq_class(12021, 10000);
  return {c, k - 1};
}

namespace detail {

// Shared pieces of the tail bound C * ((D+1)/c) * e^{-cT} * T^D at c = 2*pi*y,
// evaluated from the lower bound of y (the pessimistic side).
struct TailParts {
  BallReal c; // 2*pi*y_lo
  BallReal r; // e^{-c}
  BallReal K; // C * (D+1) / c
  long t_min; // smallest T certified to satisfy T >= D/c
};

inline TailParts tail_parts(const BallReal& y, const TailProfile& profile, long prec) {
  MpfrTmp ylo(prec);
  y.get_lower(ylo);
  if (mpfr_sgn((mpfr_srcptr)ylo) <= 0)
    throw NonPositiveImaginaryPart("tail bound needs Im(z) > 0");
  long D = profile.D;
  BallReal ylo_ball = BallReal::from_endpoints(ylo, ylo, prec);
  BallReal c = mul(mul_2exp(pi_ball(prec), 1), ylo_ball, prec);
  BallReal r = exp_ball(neg(c), prec);
  BallReal K = div(mul(BallReal::from_mpq(profile.C, prec), BallReal::from_long(D + 1, prec), prec),
                   c, prec);
  MpfrTmp thr(prec);
  BallReal dc = div(BallReal::from_long(D, prec), c, prec);
  dc.get_upper(thr);
  mpfr_ceil(thr, thr);
  long t_min = std::max(1L, mpfr_get_si(thr, MPFR_RNDU));
  return {std::move(c), std::move(r), std::move(K), t_min};
}

inline BallReal tail_bound_from_parts(const TailParts& parts, long D, long T, const BallReal& rT,
                                      long prec) {
  return mul(parts.K,
             mul(rT, pow_ui(BallReal::from_long(T, prec), (unsigned long)D, prec), prec), prec);
}

} // namespace detail

/// The tail bound expression at a caller-chosen T >= D/(2*pi*y); valid for
/// any such T, not just the minimal one.
inline BallReal truncation_tail_bound(const BallReal& y, const TailProfile& profile, long T) {
  long prec = 96;
  detail::TailParts parts = detail::tail_parts(y, profile, prec);
  if (T < parts.t_min)
    throw Error("truncation_tail_bound: T below D/(2*pi*y), the bound does not apply", 1);
  return detail::tail_bound_from_parts(parts, profile.D, T, pow_ui(parts.r, (unsigned long)T, prec),
                                       prec);
}

/// Smallest T (under outward rounding) with T >= D/(2*pi*y) and
/// C * ((D+1)/(2*pi*y)) * e^{-2*pi*y*T} * T^D < eps; if that T is 1 the
/// truncation is lifted to 100 so the sum is a genuine approximation.
/// Returns (T, tail bound at T).
inline std::pair<long, BallReal> choose_truncation_profile(const BallReal& y,
                                                           const TailProfile& profile,
                                                           const BallReal& eps) {
  long prec = 96;
  detail::MpfrTmp elo(prec);
  eps.get_lower(elo);
  if (mpfr_sgn((mpfr_srcptr)elo) <= 0)
    throw NonPositiveAccuracy("accuracy target must be positive");

  long D = profile.D;
  detail::TailParts parts = detail::tail_parts(y, profile, prec);
  constexpr long kCap = 2'000'000;
  BallReal powr = pow_ui(parts.r, (unsigned long)parts.t_min, prec);
  for (long T = parts.t_min; T <= kCap; ++T) {
    BallReal b = detail::tail_bound_from_parts(parts, D, T, powr, prec);
    detail::MpfrTmp bu(prec);
    b.get_upper(bu);
    if (mpfr_cmp(bu, elo) < 0) {
      if (T == 1) {
        BallReal b100 =
            detail::tail_bound_from_parts(parts, D, 100, pow_ui(parts.r, 100, prec), prec);
        return {100, b100};
      }
      return {T, b};
    }
    powr = mul(powr, parts.r, prec);
  }
  throw PrecisionExhausted("truncation search exceeded " + std::to_string(kCap) + " terms");
}

inline std::pair<long, BallReal> choose_truncation(const BallReal& y, long k, const BallReal& eps) {
  return choose_truncation_profile(y, cusp_tail_profile(k), eps);
}

namespace detail {

inline EvalPlan reduce_point_impl(const EvalPoint& z, long N, long k, const AtkinLehnerSign& sign,
                                  long prec, bool allow_inversion);

} // namespace detail

/// Translate/invert until the imaginary part stops improving. Levels 2 and 3
/// invert across |z| = 1/sqrt(N) via W_N; levels >= 4 only translate.
inline EvalPlan reduce_point(const EvalPoint& z, long N, long k, const AtkinLehnerSign& sign,
                             long prec = kDefaultPrec) {
  return detail::reduce_point_impl(z, N, k, sign, prec, true);
}

namespace detail {

inline EvalPlan reduce_point_impl(const EvalPoint& z, long N, long k, const AtkinLehnerSign& sign,
                                  long prec, bool allow_inversion) {
  BallComplex w = z.at_prec(prec);
  BallComplex factor = BallComplex::from_long(1, 0, prec);
  bool parity = false;
  bool can_invert = allow_inversion && (N >= 1 && N <= 3);

  mpq_class aln = 1; // N^{(2-k)/2} * N^{k-1}, exact since k is even
  if (N >= 2) {
    mpz_class nk1, nk2;
    mpz_ui_pow_ui(nk1.get_mpz_t(), N, k - 1);
    mpz_ui_pow_ui(nk2.get_mpz_t(), N, (k - 2) / 2);
    aln = mpq_class(nk1) / mpq_class(nk2);
  }

  bool decided = true;
  for (int iter = 0; iter < 64; ++iter) {
    bool progressed = false;
    // periodicity: pull Re into [-1/2, 1/2] around the midpoint; the strict
    // |Re| > 1/2 guard keeps the exact boundary from oscillating between
    // -1/2 and +1/2
    detail::MpfrTmp re_mid(prec), re_abs(prec);
    mpfr_set(re_mid, w.re().mid(), MPFR_RNDN);
    mpfr_abs(re_abs, (mpfr_srcptr)re_mid, MPFR_RNDN);
    if (mpfr_cmp_d(re_abs, 0.5) > 0) {
      mpz_class shift;
      mpfr_round(re_mid, (mpfr_srcptr)re_mid);
      mpfr_get_z(shift.get_mpz_t(), re_mid, MPFR_RNDN);
      w = BallComplex(sub(w.re(), BallReal::exact_int(shift, prec), prec), w.im());
      progressed = true;
    }

    if (can_invert) {
      BallReal scaled = norm_sqr(w, prec);
      if (N > 1) scaled = mul_rational(scaled, mpq_class(N), prec);
      detail::MpfrTmp up(prec + 8), lo(prec + 8);
      scaled.get_upper(up);
      scaled.get_lower(lo);
      if (mpfr_cmp_ui(up, 1) < 0) {
        // N |z|^2 < 1 certified: apply S (N=1) or W_N
        BallComplex nz = (N == 1) ? w : mul_rational(w, mpq_class(N), prec);
        factor = mul(factor, pow_si(nz, -k, prec), prec);
        if (N > 1) {
          factor = mul_rational(factor, aln, prec);
          parity = !parity;
        }
        w = safe_div(BallComplex::from_long(-1, 0, prec), nz, prec);
        progressed = true;
      } else if (mpfr_cmp_ui(lo, 1) >= 0) {
        // certified outside; nothing more to gain
      } else {
        // boundary straddle: harmless when y is already high, fatal when not
        detail::MpfrTmp ylo(prec + 8);
        w.im().get_lower(ylo);
        if (mpfr_cmp_d(ylo, 0.6) < 0) decided = false;
        break;
      }
    }
    if (!progressed) break;
    if (iter == 63) decided = false;
  }

  if (!decided) throw UncertainRegion("reduction boundary cannot be resolved at this precision");
  detail::MpfrTmp ylo(prec + 8);
  w.im().get_lower(ylo);
  if (mpfr_sgn((mpfr_srcptr)ylo) <= 0)
    throw UncertainRegion("reduced point no longer certifiably above the real axis");
  if (parity && !sign.certified)
    throw IndeterminateSign("W_N applied but the Atkin-Lehner sign is not certified");

  EvalPlan plan{EvalPoint{std::move(w)}, std::move(factor), parity, 0, BallReal(prec)};
  return plan;
}

} // namespace detail

/// Horner sum of a_0..a_T in q = e^{2*pi*i*z}, with the tail bound folded
/// into both component radii.
inline BallComplex evaluate_truncated(const std::vector<BallReal>& coeffs, const EvalPoint& z,
                                      long T, const BallReal& tail_bound, long prec) {
  if ((long)coeffs.size() < T + 1) throw InsufficientLength("evaluate_truncated: need T+1 coefficients");
  BallComplex q = complex_exp(mul_i(mul_real(z.z, mul_2exp(pi_ball(prec), 1), prec)), prec);
  BallComplex s = BallComplex::from_real(round_to(coeffs[T], prec));
  for (long n = T - 1; n >= 0; --n)
    s = add(mul(s, q, prec), BallComplex::from_real(round_to(coeffs[n], prec)), prec);
  s.re_mut().add_error(tail_bound);
  s.im_mut().add_error(tail_bound);
  return s;
}

/// Same sum on the imaginary axis, entirely in real balls (q = e^{-2*pi*y}).
inline BallReal evaluate_truncated_real(const std::vector<BallReal>& coeffs, const BallReal& y,
                                        long T, const BallReal& tail_bound, long prec) {
  if ((long)coeffs.size() < T + 1) throw InsufficientLength("evaluate_truncated_real: need T+1 coefficients");
  BallReal q = exp_ball(neg(mul(mul_2exp(pi_ball(prec), 1), y, prec)), prec);
  BallReal s = round_to(coeffs[T], prec);
  for (long n = T - 1; n >= 0; --n) s = add(mul(s, q, prec), coeffs[n], prec);
  s.add_error(tail_bound);
  return s;
}

namespace detail {

inline long accuracy_start_prec(const BallReal& eps) {
  MpfrTmp lo(96);
  eps.get_lower(lo);
  long e = (long)mpfr_get_exp(lo); // eps ~ 2^e
  return std::max<long>(64, -e + 32);
}

inline bool is_exact_zero(const BallReal& b) {
  return b.is_exact() && mpfr_zero_p(b.mid());
}

// One evaluation pass at fixed precision; the caller owns the retry loop.
inline BallComplex evaluate_pass(const EigenformHandle& f, const EvalPoint& z, const BallReal& eps,
                                 const AtkinLehnerSign& sign, bool allow_inversion, long wp,
                                 long* truncation_out) {
  long N = f.level, k = f.weight;
  EvalPlan plan = reduce_point_impl(z, N, k, sign, wp, allow_inversion);
  BallReal fup = abs_bounds(plan.factor, 96).second;
  // tail + summation target: eps / (4 |factor|)
  BallReal eps_t = div(eps, mul_2exp(fup, 2), 96);
  detail::MpfrTmp ylo(wp + 8);
  plan.reduced_point.z.im().get_lower(ylo);
  BallReal y_lo = BallReal::from_endpoints(ylo, ylo, wp);
  auto [T, tail] = choose_truncation_profile(y_lo, cusp_tail_profile(k), eps_t);
  if (truncation_out) *truncation_out = T;
  std::vector<BallReal> coeffs = eigenform_coeffs(f, T, wp);

  BallComplex val(wp);
  bool imaginary_axis = is_exact_zero(plan.reduced_point.z.re()) && is_exact_zero(plan.factor.im());
  if (imaginary_axis) {
    BallReal vr = evaluate_truncated_real(coeffs, plan.reduced_point.z.im(), T, tail, wp);
    val = BallComplex(mul(plan.factor.re(), vr, wp), BallReal(wp));
  } else {
    val = mul(plan.factor, evaluate_truncated(coeffs, plan.reduced_point, T, tail, wp), wp);
  }
  if (plan.used_wN && sign.sign < 0) val = neg(val);
  return val;
}

inline bool radius_below(const BallComplex& v, const BallReal& eps) {
  MpfrTmp lo(96);
  eps.get_lower(lo);
  return v.is_finite() && mpfr_cmp(v.re().rad(), lo) < 0 && mpfr_cmp(v.im().rad(), lo) < 0;
}

} // namespace detail

/// Rigorous f(z) with both component radii below eps. Adaptive: precision
/// doubles on failure, at most 8 times.
inline BallComplex evaluate_form(const EigenformHandle& f, const EvalPoint& z, const BallReal& eps,
                                 const AtkinLehnerSign& sign, long* truncation_out = nullptr) {
  long wp = detail::accuracy_start_prec(eps);
  for (int attempt = 0; attempt <= 8; ++attempt, wp *= 2) {
    try {
      BallComplex v = detail::evaluate_pass(f, z, eps, sign, true, wp, truncation_out);
      if (detail::radius_below(v, eps)) return v;
    } catch (const UncertainRegion&) {
      // retry tighter
    }
  }
  throw PrecisionExhausted("evaluate_form: accuracy target unmet after 8 precision doublings");
}

/// f(z) without ever applying an inversion — the evaluation the sign
/// certification below relies on (it must not consume the sign itself).
inline BallComplex evaluate_form_no_inversion(const EigenformHandle& f, const EvalPoint& z,
                                              const BallReal& eps) {
  long wp = detail::accuracy_start_prec(eps);
  AtkinLehnerSign dummy{f.level, 1, true};
  for (int attempt = 0; attempt <= 8; ++attempt, wp *= 2) {
    try {
      BallComplex v = detail::evaluate_pass(f, z, eps, dummy, false, wp, nullptr);
      if (detail::radius_below(v, eps)) return v;
    } catch (const UncertainRegion&) {
    }
  }
  throw PrecisionExhausted("evaluate_form_no_inversion: accuracy target unmet");
}

/// Certify the W_N eigenvalue by comparing a direct evaluation of f at i
/// with the W_N-transformed expression evaluated through f(i/N). Both
/// evaluations avoid inversions, so nothing here presupposes the sign.
inline AtkinLehnerSign atkin_lehner_sign(const EigenformHandle& f, long N, const BallReal& eps) {
  if (N != 2 && N != 3) {
    if (N == 1) return {1, 1, true};
    throw UnsupportedLevel("Atkin-Lehner certification implemented for N in {2, 3}");
  }
  long k = f.weight;
  mpq_class aln;
  {
    mpz_class nk1, nk2;
    mpz_ui_pow_ui(nk1.get_mpz_t(), N, k - 1);
    mpz_ui_pow_ui(nk2.get_mpz_t(), N, (k - 2) / 2);
    aln = mpq_class(nk1) / mpq_class(nk2);
  }
  // (N*i)^{-k} = (-1)^{k/2} N^{-k}, real and exact for even k
  mpq_class nik;
  {
    mpz_class nk;
    mpz_ui_pow_ui(nk.get_mpz_t(), N, k);
    nik = mpq_class(((k / 2) % 2) ? -1 : 1) / mpq_class(nk);
  }

  BallReal target = eps;
  for (int attempt = 0; attempt < 6; ++attempt) {
    long prec = std::max<long>(96, detail::accuracy_start_prec(target));
    EvalPoint zi = make_eval_point(mpq_class(0), mpq_class(1), prec);
    EvalPoint zin = make_eval_point(mpq_class(0), mpq_class(1, N), prec);
    BallComplex A = evaluate_form_no_inversion(f, zi, target);
    BallComplex B0 = evaluate_form_no_inversion(f, zin, target);
    BallComplex W = mul_rational(B0, aln * nik, prec);
    // realness on the imaginary axis: work with the real parts
    if (A.im().contains_rational(0) && W.im().contains_rational(0)) {
      const BallReal& a = A.re();
      const BallReal& w = W.re();
      bool plus = overlaps(w, a);
      bool minus = overlaps(w, neg(a));
      if (plus != minus) return {N, plus ? 1 : -1, true};
    }
    target = mul_rational(target, mpq_class(1, 100), 96);
  }
  throw IndeterminateSign("level " + std::to_string(N) +
                          ": both sign candidates remain consistent");
}

} // namespace hecke
