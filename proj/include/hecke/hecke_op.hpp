#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hecke/ball.hpp"
#include "hecke/ball_complex.hpp"
#include "hecke/eigenform.hpp"
#include "hecke/errors.hpp"
#include "hecke/eval.hpp"
#include "hecke/qexp.hpp"

namespace hecke {

enum class Method { direct, eisenstein };

inline const char* method_label(Method m) {
  return m == Method::direct ? "direct" : "eisenstein";
}

/// One summand of the T_p sum: where to evaluate and the exact multiplier.
struct HeckePoint {
  BallComplex point;
  mpq_class weight;
};

/// The points and weights of T_p(f)(z0): p^{k-1} f(p z0) (absent when p | N)
/// followed by (1/p) f((z0 + j)/p) for j = 0..p-1.
inline std::vector<HeckePoint> hecke_points(const EvalPoint& z0, long p, long N, long k,
                                            long prec = kDefaultPrec) {
  std::vector<HeckePoint> out;
  out.reserve(p + 1);
  if (N % p != 0) {
    mpz_class pk1;
    mpz_ui_pow_ui(pk1.get_mpz_t(), (unsigned long)p, (unsigned long)(k - 1));
    out.push_back({mul_rational(z0.z, mpq_class(p), prec), mpq_class(pk1)});
  }
  mpq_class inv_p(1, p);
  for (long j = 0; j < p; ++j) {
    BallComplex t = add(z0.z, BallComplex::from_long(j, 0, prec), prec);
    out.push_back({mul_rational(t, inv_p, prec), inv_p});
  }
  return out;
}

/// Accuracy allocation for one eigenvalue computation.
struct ErrorBudget {
  BallReal eps;                   // target accuracy for lambda_p
  mpq_class h;                    // numerator/denominator split parameter
  BallReal eps_x;                 // numerator budget
  BallReal eps_y;                 // denominator budget
  std::vector<BallReal> per_term; // per-summand budgets for the T_p sum
};

/// Splits a numerator budget across the summands: each evaluation gets
/// base / |w_j| with base = (3/4) eps_x / n, so the weighted errors sum to
/// (3/4) eps_x and the remaining quarter absorbs merge rounding.
inline std::vector<BallReal> hecke_term_budgets(const BallReal& eps_x,
                                               const std::vector<mpq_class>& weights) {
  long n = (long)weights.size();
  if (n == 0) return {};
  mpq_class share(3, 4 * n);
  share.canonicalize();
  BallReal base = mul_rational(eps_x, share, 96);
  std::vector<BallReal> out;
  out.reserve(n);
  for (const mpq_class& w : weights)
    out.push_back(mul_rational(base, mpq_class(1) / abs(w), 96));
  return out;
}

/// Rigorous two-sided bounds on the magnitude of a nonzero quantity,
/// obtained from coarse evaluations of decreasing accuracy eps~.
struct CoarseBounds {
  BallReal lower;      // 0 < lower <= |value|, directed endpoint (radius 0)
  BallReal upper;      // |value| <= upper, directed endpoint (radius 0)
  mpq_class eps_tilde; // the accepted coarse accuracy
};

/// Evaluates at accuracy eps~/2 for eps~ = 0.1, 0.01, ... until the estimate
/// m = |midpoint| satisfies m - 2 eps~ > 0; the bounds (m - 2 eps~, m + 2 eps~)
/// then hold for any later approximation whose error stays below eps~.
inline CoarseBounds coarse_nonzero_bounds(
    const std::function<BallComplex(const BallReal&)>& evaluator) {
  mpq_class et(1, 10);
  for (int j = 0; j < 30; ++j, et /= 10) {
    long wp = 96 + (long)mpz_sizeinbase(et.get_den().get_mpz_t(), 2);
    BallComplex v = evaluator(BallReal::from_mpq(et / 2, wp));
    long mag = 0;
    if (!mpfr_zero_p(v.re().mid())) mag = std::max(mag, (long)mpfr_get_exp(v.re().mid()));
    if (!mpfr_zero_p(v.im().mid())) mag = std::max(mag, (long)mpfr_get_exp(v.im().mid()));
    wp += mag;
    BallReal re_m = BallReal::from_endpoints(v.re().mid(), v.re().mid(), wp);
    BallReal im_m = BallReal::from_endpoints(v.im().mid(), v.im().mid(), wp);
    BallReal m = sqrt_ball(add(sqr(re_m, wp), sqr(im_m, wp), wp), wp);
    BallReal two_et = BallReal::from_mpq(2 * et, wp);
    BallReal lo = sub(m, two_et, wp);
    detail::MpfrTmp l(wp);
    lo.get_lower(l);
    if (mpfr_sgn((mpfr_srcptr)l) > 0) {
      BallReal up = add(m, two_et, wp);
      detail::MpfrTmp u(wp);
      up.get_upper(u);
      return {BallReal::from_endpoints(l, l, wp), BallReal::from_endpoints(u, u, wp), et};
    }
  }
  throw ProbablyZero("estimate stayed within twice the coarse accuracy of zero after 30 refinements");
}

namespace detail {

/// Adaptive driver state for the Eisenstein route: one fixed-accuracy pass.
inline BallComplex eisenstein_pass(const EigenformHandle& f, const EvalPoint& z,
                                   const CuspBasis& basis, const BallReal& eps_in, long wp,
                                   long* truncation_out) {
  long k = f.weight;
  long d = basis.dim();
  AtkinLehnerSign triv{1, 1, true};
  long wp0 = wp;
  EvalPlan plan = reduce_point(z, 1, k, triv, wp);

  // Delta is reconstituted as (E4^3 - E6^2)/1728 with E4, E6 close to 1 at
  // the reduced point; the difference is of order q = e^{-2 pi y}, so about
  // 2 pi y / ln 2 leading bits cancel. Both the series targets and the
  // working precision must absorb that loss, or the pass's radius bottoms
  // out far above any requested accuracy.
  double y_up = plan.reduced_point.z.im().upper_d();
  long cancel = 0;
  if (y_up > 0 && y_up < 1e15) cancel = (long)(9.0647 * y_up) + 16; // 2 pi / ln 2 = 9.0647...
  wp += cancel;
  BallReal eps_e = mul_2exp(eps_in, -cancel);
  // the reduction only needs redoing when the extra demand exceeds the
  // slack the driver already grants
  if (wp > wp0 + 48) plan = reduce_point(z, 1, k, triv, wp);

  MpfrTmp ylo(wp + 8);
  plan.reduced_point.z.im().get_lower(ylo);
  BallReal y_lo = BallReal::from_endpoints(ylo, ylo, wp);
  auto [t4, tail4] = choose_truncation_profile(y_lo, eisenstein_tail_profile(4), eps_e);
  auto [t6, tail6] = choose_truncation_profile(y_lo, eisenstein_tail_profile(6), eps_e);
  if (truncation_out) *truncation_out = std::max(t4, t6);

  ZSeries z4 = eisenstein_zexp(4, t4);
  ZSeries z6 = eisenstein_zexp(6, t6);
  std::vector<BallReal> c4, c6;
  c4.reserve(t4 + 1);
  c6.reserve(t6 + 1);
  for (long n = 0; n <= t4; ++n) c4.push_back(BallReal::exact_int(z4[n], wp));
  for (long n = 0; n <= t6; ++n) c6.push_back(BallReal::exact_int(z6[n], wp));

  // coordinates of f in the echelon basis, pushed through to the
  // generator products Delta * E4^a * E6^b
  std::vector<BallReal> fc = eigenform_coeffs(f, d, wp);
  std::vector<BallReal> w(d, BallReal(wp));
  for (long jj = 0; jj < d; ++jj)
    for (long i = 0; i < d; ++i)
      w[jj] = add(w[jj], mul_rational(fc[i + 1], basis.transform[i][jj], wp), wp);

  long maxa = 0, maxb = 0;
  for (const auto& [a, b] : basis.exponent_pairs) {
    maxa = std::max(maxa, a);
    maxb = std::max(maxb, b);
  }

  mpq_class inv1728(1, 1728);
  bool axis = is_exact_zero(plan.reduced_point.z.re()) && is_exact_zero(plan.factor.im());
  if (axis) {
    const BallReal& y = plan.reduced_point.z.im();
    BallReal x4 = evaluate_truncated_real(c4, y, t4, tail4, wp);
    BallReal x6 = evaluate_truncated_real(c6, y, t6, tail6, wp);
    std::vector<BallReal> xp{BallReal::from_long(1, wp)}, yp{BallReal::from_long(1, wp)};
    for (long a = 1; a <= maxa; ++a) xp.push_back(mul(xp.back(), x4, wp));
    for (long b = 1; b <= maxb; ++b) yp.push_back(mul(yp.back(), x6, wp));
    BallReal s(wp);
    for (long jj = 0; jj < d; ++jj) {
      auto [a, b] = basis.exponent_pairs[jj];
      s = add(s, mul(w[jj], mul(xp[a], yp[b], wp), wp), wp);
    }
    BallReal delta = mul_rational(sub(pow_ui(x4, 3, wp), sqr(x6, wp), wp), inv1728, wp);
    BallReal val = mul(plan.factor.re(), mul(delta, s, wp), wp);
    return BallComplex(std::move(val), BallReal(wp));
  }
  BallComplex x4 = evaluate_truncated(c4, plan.reduced_point, t4, tail4, wp);
  BallComplex x6 = evaluate_truncated(c6, plan.reduced_point, t6, tail6, wp);
  std::vector<BallComplex> xp{BallComplex::from_long(1, 0, wp)}, yp{BallComplex::from_long(1, 0, wp)};
  for (long a = 1; a <= maxa; ++a) xp.push_back(mul(xp.back(), x4, wp));
  for (long b = 1; b <= maxb; ++b) yp.push_back(mul(yp.back(), x6, wp));
  BallComplex s(wp);
  for (long jj = 0; jj < d; ++jj) {
    auto [a, b] = basis.exponent_pairs[jj];
    s = add(s, mul_real(mul(xp[a], yp[b], wp), w[jj], wp), wp);
  }
  BallComplex delta = mul_rational(sub(pow_si(x4, 3, wp), mul(x6, x6, wp), wp), inv1728, wp);
  return mul(plan.factor, mul(delta, s, wp), wp);
}

} // namespace detail

/// f(z) through the level-1 generator ring: f = P(E4, E6) exactly, with
/// Delta replaced by (E4^3 - E6^2)/1728, and E4, E6 evaluated by truncated
/// series. The accuracy of the two series evaluations is tightened until the
/// propagated radius of P meets the target.
inline BallComplex eisenstein_path_value(const EigenformHandle& f, const EvalPoint& z,
                                         const BallReal& eps, long* truncation_out = nullptr) {
  if (f.level != 1) throw UnsupportedLevel("the Eisenstein route requires level 1");
  {
    detail::MpfrTmp lo(96);
    eps.get_lower(lo);
    if (mpfr_sgn((mpfr_srcptr)lo) <= 0)
      throw NonPositiveAccuracy("eisenstein_path_value: accuracy target must be positive");
  }
  long d = cusp_dim(f.weight);
  if (d == 0) throw EmptySpace("no cusp forms in weight " + std::to_string(f.weight));
  CuspBasis basis = cusp_basis(f.weight, d);

  BallReal eps_e = mul_2exp(eps, -6);
  long last_step = 0;
  long last_worst = LONG_MAX;
  for (int attempt = 0; attempt <= 12; ++attempt) {
    long wp = detail::accuracy_start_prec(eps_e) + 64;
    try {
      BallComplex v = detail::eisenstein_pass(f, z, basis, eps_e, wp, truncation_out);
      if (detail::radius_below(v, eps)) return v;
      long shrink = 4;
      long worst = LONG_MIN;
      if (v.is_finite()) {
        detail::MpfrTmp lo(96);
        eps.get_lower(lo);
        if (!mpfr_zero_p(v.re().rad())) worst = std::max(worst, (long)mpfr_get_exp(v.re().rad()));
        if (!mpfr_zero_p(v.im().rad())) worst = std::max(worst, (long)mpfr_get_exp(v.im().rad()));
        if (worst != LONG_MIN) shrink = std::max<long>(4, worst - (long)mpfr_get_exp(lo) + 3);
      }
      // the tail bound responds to the target in coarse truncation steps, so
      // the measured radius can sit still across a small reduction; escalate
      // geometrically while the previous step bought less than half its size
      if (worst != LONG_MIN && worst > last_worst - last_step / 2)
        shrink = std::max(shrink, 2 * last_step);
      last_worst = (worst == LONG_MIN) ? LONG_MAX : worst;
      last_step = shrink;
      eps_e = mul_2exp(eps_e, -shrink);
    } catch (const UncertainRegion&) {
      long step = std::max<long>(8, 2 * last_step);
      last_worst = LONG_MAX;
      last_step = step;
      eps_e = mul_2exp(eps_e, -step);
    }
  }
  throw PrecisionExhausted("eisenstein_path_value: accuracy target unmet after 12 refinements");
}

/// Single-point evaluation via the chosen route.
inline BallComplex evaluate_route(const EigenformHandle& f, const EvalPoint& z, const BallReal& eps,
                                  const AtkinLehnerSign& sign, Method method,
                                  long* truncation_out = nullptr) {
  if (method == Method::direct) return evaluate_form(f, z, eps, sign, truncation_out);
  return eisenstein_path_value(f, z, eps, truncation_out);
}

/// T_p applied analytically at one point.
struct HeckeApplication {
  BallComplex value;
  long term_count = 0; // form evaluations performed
  long truncation = 0; // largest series truncation among them
};

namespace detail {

struct HeckeTerm {
  EvalPoint point;
  mpq_class weight;
  bool real_part = false; // conjugate-paired term: only its real part enters
};

inline EvalPoint term_point(BallComplex ball, std::optional<std::pair<mpq_class, mpq_class>> ex) {
  return EvalPoint{std::move(ball), std::move(ex)};
}

/// Summands for purely imaginary z0 = iy: the two on-axis points plus one
/// representative of each conjugate pair (z0+b)/p ~ (z0-b)/p, with doubled
/// weight. For p = 2 the off-axis point is self-paired (real value, weight
/// 1/p), so there are no savings, only realness. Exact coordinates of z0
/// propagate to every summand.
inline std::vector<HeckeTerm> hecke_terms_mirror(const EvalPoint& z0, long p, long N, long k,
                                                 long prec) {
  std::vector<HeckeTerm> out;
  const BallReal& y = z0.z.im();
  std::optional<mpq_class> yq;
  if (z0.exact) yq = z0.exact->second;
  auto exact_iy = [&](const mpq_class& re, const mpq_class& scale)
      -> std::optional<std::pair<mpq_class, mpq_class>> {
    if (!yq) return std::nullopt;
    return std::make_pair(re, *yq * scale);
  };
  mpq_class inv_p(1, p);
  if (N % p != 0) {
    mpz_class pk1;
    mpz_ui_pow_ui(pk1.get_mpz_t(), (unsigned long)p, (unsigned long)(k - 1));
    out.push_back({term_point(BallComplex(BallReal(prec), mul_rational(y, mpq_class(p), prec)),
                              exact_iy(0, mpq_class(p))),
                   mpq_class(pk1), false});
  }
  out.push_back({term_point(BallComplex(BallReal(prec), mul_rational(y, inv_p, prec)),
                            exact_iy(0, inv_p)),
                 inv_p, false});
  for (long b = 1; b <= p / 2; ++b) {
    BallComplex pt(BallReal::from_mpq(mpq_class(b, p), prec), mul_rational(y, inv_p, prec));
    bool self = (2 * b == p);
    out.push_back({term_point(std::move(pt), exact_iy(mpq_class(b, p), inv_p)),
                   self ? inv_p : mpq_class(2, p), true});
  }
  return out;
}

inline std::vector<HeckeTerm> hecke_terms_general(const EvalPoint& z0, long p, long N, long k,
                                                  long prec) {
  std::vector<HeckeTerm> out;
  size_t idx = 0;
  bool has_pterm = (N % p != 0);
  for (HeckePoint& hp : hecke_points(z0, p, N, k, prec)) {
    std::optional<std::pair<mpq_class, mpq_class>> ex;
    if (z0.exact) {
      const auto& [x0, y0] = *z0.exact;
      if (has_pterm && idx == 0)
        ex = std::make_pair(x0 * p, y0 * p);
      else {
        long j = (long)idx - (has_pterm ? 1 : 0);
        ex = std::make_pair((x0 + j) / p, y0 / mpq_class(p));
      }
    }
    out.push_back({term_point(std::move(hp.point), std::move(ex)), std::move(hp.weight), false});
    ++idx;
  }
  return out;
}

/// Runs body(0..n-1), spreading the indices over up to `threads` workers when
/// the MPFR build is thread-safe. The first captured exception is rethrown.
template <typename Fn>
inline void parallel_for(long n, long threads, Fn&& body) {
  long use = std::min(threads, n);
  if (use <= 1 || !mpfr_buildopt_tls_p()) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::exception_ptr> errors((size_t)use);
  std::vector<std::thread> pool;
  pool.reserve((size_t)use);
  for (long t = 0; t < use; ++t)
    pool.emplace_back([&, t] {
      try {
        for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
      } catch (...) {
        errors[(size_t)t] = std::current_exception();
      }
    });
  for (std::thread& th : pool) th.join();
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace detail

/// T_p(f)(z0) as a ball of radius < eps_x. For purely imaginary z0 the
/// conjugate pairing halves the off-axis evaluations and the whole sum is
/// carried out over real balls; the result then has an exactly zero
/// imaginary part.
inline HeckeApplication apply_hecke_full(const EigenformHandle& f, long p, const EvalPoint& z0,
                                         const BallReal& eps_x, const AtkinLehnerSign& sign,
                                         Method method = Method::direct, long threads = 1) {
  long N = f.level, k = f.weight;
  bool mirror = detail::is_exact_zero(z0.z.re());
  long prec0 = detail::accuracy_start_prec(eps_x) + 64;

  for (int attempt = 0; attempt <= 3; ++attempt) {
    long prec = prec0 + 128 * attempt;
    std::vector<detail::HeckeTerm> terms = mirror
                                               ? detail::hecke_terms_mirror(z0, p, N, k, prec)
                                               : detail::hecke_terms_general(z0, p, N, k, prec);
    long n = (long)terms.size();
    BallReal target = mul_2exp(eps_x, -2 * attempt);
    std::vector<mpq_class> weights;
    weights.reserve(n);
    for (const detail::HeckeTerm& t : terms) weights.push_back(t.weight);
    std::vector<BallReal> budgets = hecke_term_budgets(target, weights);

    std::vector<BallComplex> vals((size_t)n);
    std::vector<long> truncs((size_t)n, 0);
    detail::parallel_for(n, threads, [&](long i) {
      vals[(size_t)i] = evaluate_route(f, terms[(size_t)i].point, budgets[(size_t)i], sign, method,
                                       &truncs[(size_t)i]);
    });

    // merge precision: clear all term magnitudes plus the accuracy target
    long mag = 0;
    for (long i = 0; i < n; ++i) {
      const mpq_class& w = weights[(size_t)i];
      long wb = (long)mpz_sizeinbase(w.get_num().get_mpz_t(), 2) -
                (long)mpz_sizeinbase(w.get_den().get_mpz_t(), 2);
      long vb = 0;
      if (!mpfr_zero_p(vals[(size_t)i].re().mid()))
        vb = std::max(vb, (long)mpfr_get_exp(vals[(size_t)i].re().mid()));
      if (!mpfr_zero_p(vals[(size_t)i].im().mid()))
        vb = std::max(vb, (long)mpfr_get_exp(vals[(size_t)i].im().mid()));
      mag = std::max(mag, wb + vb);
    }
    long mp = prec + std::max<long>(0, mag) + 64;

    BallComplex acc(mp);
    if (mirror) {
      BallReal acc_re(mp);
      for (long i = 0; i < n; ++i)
        acc_re = add(acc_re, mul_rational(vals[(size_t)i].re(), weights[(size_t)i], mp), mp);
      acc = BallComplex(std::move(acc_re), BallReal(mp));
    } else {
      for (long i = 0; i < n; ++i)
        acc = add(acc, mul_rational(vals[(size_t)i], weights[(size_t)i], mp), mp);
    }
    if (detail::radius_below(acc, eps_x))
      return {std::move(acc), n, *std::max_element(truncs.begin(), truncs.end())};
  }
  throw PrecisionExhausted("apply_hecke: summed radius exceeded the numerator budget");
}

inline BallComplex apply_hecke(const EigenformHandle& f, long p, const EvalPoint& z0,
                               const BallReal& eps_x, const AtkinLehnerSign& sign) {
  return apply_hecke_full(f, p, z0, eps_x, sign).value;
}

/// Unique-integer rounding for one-dimensional spaces.
inline std::optional<mpz_class> round_eigenvalue(const BallReal& value, long space_dimension) {
  if (space_dimension != 1) return std::nullopt;
  if (!value.is_finite()) return std::nullopt;
  if (mpfr_cmp_d(value.rad(), 0.5) >= 0) return std::nullopt;
  long wp = value.prec() + 64;
  detail::MpfrTmp lo(wp), hi(wp);
  value.get_lower(lo);
  value.get_upper(hi);
  mpfr_ceil(lo, (mpfr_srcptr)lo);
  mpfr_floor(hi, (mpfr_srcptr)hi);
  if (mpfr_cmp((mpfr_srcptr)lo, (mpfr_srcptr)hi) != 0) return std::nullopt;
  mpz_class out;
  mpfr_get_z(out.get_mpz_t(), (mpfr_srcptr)lo, MPFR_RNDN);
  // the whole ball must additionally sit strictly inside (n - 1/2, n + 1/2):
  // rounding is only claimed when unambiguous with a margin to both neighbours
  detail::MpfrTmp a(wp), b(wp);
  value.get_lower(a);
  value.get_upper(b);
  mpfr_sub_z(a, (mpfr_srcptr)a, out.get_mpz_t(), MPFR_RNDD);
  mpfr_sub_z(b, (mpfr_srcptr)b, out.get_mpz_t(), MPFR_RNDU);
  if (mpfr_cmp_d((mpfr_srcptr)a, -0.5) <= 0 || mpfr_cmp_d((mpfr_srcptr)b, 0.5) >= 0)
    return std::nullopt;
  return out;
}

/// The computed eigenvalue together with its certificate and bookkeeping.
struct HeckeEigenvalue {
  long p = 0;
  BallReal value;                 // real ball; imaginary part certified around 0 and dropped
  std::optional<mpz_class> exact; // unique integer in the ball, dimension-1 spaces only
  Method method = Method::direct;
  EvalPoint z0;
  long truncation = 0; // largest series truncation among the T_p evaluations
  long term_count = 0; // form evaluations performed for T_p
  double wall_ms = 0.0;
};

namespace detail {

/// |midpoint| must stay within the Ramanujan bound 2 p^{(k-1)/2} (plus the
/// radius); a certain violation means the computation is broken.
inline void check_ramanujan(const BallReal& value, long p, long k) {
  mpz_class pk1;
  mpz_ui_pow_ui(pk1.get_mpz_t(), (unsigned long)p, (unsigned long)(k - 1));
  long wp = std::max<long>(128, value.prec());
  BallReal bound = mul_2exp(sqrt_ball(BallReal::exact_int(pk1, wp), wp), 1);
  BallReal radb = BallReal::from_endpoints(value.rad(), value.rad(), wp);
  MpfrTmp am(wp), rhs(wp);
  mpfr_abs(am, value.mid(), MPFR_RNDU);
  add(bound, radb, wp).get_upper(rhs);
  if (mpfr_cmp((mpfr_srcptr)am, (mpfr_srcptr)rhs) > 0)
    throw Error("eigenvalue exceeds the Ramanujan bound: internal inconsistency", 1);
}

} // namespace detail

/// Budgets per the quotient bound: eps_x < h eps |y_A| / 2 and
/// eps_y < min((1-h) eps |y_A| / (2 |z_A|), |y_A| / 2), instantiated with the
/// certified coarse bounds and capped by the coarse accuracies themselves
/// (the coarse bounds are only valid for final errors below eps~).
inline ErrorBudget allocate_budget(const BallReal& eps, const mpq_class& h, const CoarseBounds& yb,
                                   const CoarseBounds& xb) {
  long wp = std::max<long>(128, std::max(yb.lower.prec(), xb.upper.prec()));
  mpq_class safety(15, 16);
  auto lower_endpoint = [&](const BallReal& v) {
    detail::MpfrTmp t(wp);
    v.get_lower(t);
    return BallReal::from_endpoints(t, t, wp);
  };
  auto min_by_lower = [&](const BallReal& a, const BallReal& b) {
    detail::MpfrTmp ta(wp), tb(wp);
    a.get_lower(ta);
    b.get_lower(tb);
    return mpfr_cmp((mpfr_srcptr)ta, (mpfr_srcptr)tb) <= 0 ? lower_endpoint(a) : lower_endpoint(b);
  };

  BallReal zup = div(xb.upper, yb.lower, wp);
  mpq_class hx = h / 2 * safety;
  BallReal cand_x = mul_rational(mul(eps, yb.lower, wp), hx, wp);
  BallReal eps_x = min_by_lower(cand_x, BallReal::from_mpq(xb.eps_tilde, wp));

  mpq_class hy = (1 - h) / 2 * safety;
  BallReal cand_y1 = mul_rational(div(mul(eps, yb.lower, wp), zup, wp), hy, wp);
  BallReal cand_y2 = mul_rational(yb.lower, mpq_class(1, 2) * safety, wp);
  BallReal eps_y =
      min_by_lower(min_by_lower(cand_y1, cand_y2), BallReal::from_mpq(yb.eps_tilde, wp));
  return {eps, h, std::move(eps_x), std::move(eps_y), {}};
}

/// lambda_p = T_p(f)(z0) / f(z0) with a certified final radius below eps.
inline HeckeEigenvalue eigenvalue_numerical(const EigenformHandle& f, long p, const BallReal& eps,
                                            std::optional<EvalPoint> z0 = std::nullopt,
                                            std::optional<mpq_class> h = std::nullopt,
                                            Method method = Method::direct, long threads = 1,
                                            std::optional<AtkinLehnerSign> sign = std::nullopt) {
  auto t_start = std::chrono::steady_clock::now();
  {
    detail::MpfrTmp lo(96);
    eps.get_lower(lo);
    if (mpfr_sgn((mpfr_srcptr)lo) <= 0)
      throw NonPositiveAccuracy("eigenvalue_numerical: accuracy target must be positive");
  }
  {
    mpz_class pz(p);
    if (p < 2 || mpz_probab_prime_p(pz.get_mpz_t(), 40) == 0)
      throw CompositeIndex("T_" + std::to_string(p) + ": the index must be prime");
  }
  if (method == Method::eisenstein && f.level != 1)
    throw UnsupportedLevel("the Eisenstein route requires level 1");
  mpq_class hv = h.value_or(mpq_class(1, 2));
  if (hv <= 0 || hv >= 1) throw Error("the split parameter h must lie strictly inside (0, 1)", 1);

  AtkinLehnerSign sv{f.level, 1, true};
  if (sign) {
    sv = *sign;
  } else if (f.level != 1) {
    if (f.from_file() && f.file->atkin_lehner_sign != 0)
      sv = {f.level, f.file->atkin_lehner_sign, true};
    else
      sv = atkin_lehner_sign(f, f.level, BallReal::from_mpq(mpq_class(1, 100000000), 96));
  }

  EvalPoint zp = z0 ? *z0 : make_eval_point(mpq_class(0), mpq_class(1), 192);

  CoarseBounds yb = coarse_nonzero_bounds(
      [&](const BallReal& e) { return evaluate_route(f, zp, e, sv, method, nullptr); });
  CoarseBounds xb = coarse_nonzero_bounds(
      [&](const BallReal& e) { return apply_hecke_full(f, p, zp, e, sv, method, threads).value; });

  ErrorBudget budget = allocate_budget(eps, hv, yb, xb);

  long ex = (long)mpfr_get_exp(xb.upper.mid());
  long ey = (long)mpfr_get_exp(yb.lower.mid());
  long divp = detail::accuracy_start_prec(eps) + std::max<long>(0, ex) - std::min<long>(0, ey) + 64;

  detail::MpfrTmp eps_lo(96);
  eps.get_lower(eps_lo);
  for (int attempt = 0; attempt <= 3; ++attempt) {
    BallReal ex_a = mul_2exp(budget.eps_x, -attempt);
    BallReal ey_a = mul_2exp(budget.eps_y, -attempt);
    HeckeApplication num = apply_hecke_full(f, p, zp, ex_a, sv, method, threads);
    BallComplex den = evaluate_route(f, zp, ey_a, sv, method, nullptr);
    BallComplex lam = safe_div(num.value, den, divp + 64 * attempt);
    if (!lam.im().contains_rational(0)) continue; // certification failed: tighten and retry
    if (!(lam.re().is_finite() && mpfr_cmp(lam.re().rad(), (mpfr_srcptr)eps_lo) < 0)) continue;

    BallReal value = lam.re();
    detail::check_ramanujan(value, p, f.weight);
    HeckeEigenvalue out;
    out.p = p;
    out.value = std::move(value);
    out.exact = round_eigenvalue(out.value, eigenform_dim(f));
    out.method = method;
    out.z0 = zp;
    out.truncation = num.truncation;
    out.term_count = num.term_count;
    out.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
  }
  throw PrecisionExhausted("eigenvalue_numerical: certification failed after budget tightening");
}

} // namespace hecke
