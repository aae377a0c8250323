#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <optional>
#include <utility>
#include <vector>

#include "hecke/ball.hpp"
#include "hecke/errors.hpp"

namespace hecke {

/// Polynomial coefficients, low degree first.
using QPoly = std::vector<mpq_class>;

inline long poly_degree(const QPoly& p) {
  long d = (long)p.size() - 1;
  while (d >= 0 && p[d] == 0) --d;
  return d;
}

inline mpq_class poly_eval(const QPoly& p, const mpq_class& x) {
  mpq_class v = 0;
  for (long i = (long)p.size() - 1; i >= 0; --i) v = v * x + p[i];
  return v;
}

inline QPoly poly_derivative(const QPoly& p) {
  if (p.size() <= 1) return {mpq_class(0)};
  QPoly d(p.size() - 1);
  for (size_t i = 1; i < p.size(); ++i) d[i - 1] = mpq_class(i) * p[i];
  return d;
}

/// Remainder of a mod b over Q (b nonzero).
inline QPoly poly_rem(QPoly a, const QPoly& b) {
  long db = poly_degree(b);
  long da = poly_degree(a);
  mpq_class lead = b[db];
  while (da >= db) {
    mpq_class f = a[da] / lead;
    for (long i = 0; i <= db; ++i) a[da - db + i] -= f * b[i];
    da = poly_degree(a);
  }
  a.resize(std::max<long>(da + 1, 1));
  return a;
}

/// Rescale by a positive rational so the coefficients become coprime
/// integers.  Signs are preserved, so root locations, Sturm variation
/// counts and gcd degrees are unaffected; without this the remainder
/// sequences below suffer exponential coefficient growth.
inline void poly_scale_primitive(QPoly& p) {
  mpz_class den(1), num(0);
  for (const auto& c : p) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), c.get_den().get_mpz_t());
  for (auto& c : p) {
    c *= den;
    mpz_gcd(num.get_mpz_t(), num.get_mpz_t(), c.get_num().get_mpz_t());
  }
  if (num > 1)
    for (auto& c : p) c /= num;
}

inline QPoly poly_gcd(QPoly a, QPoly b) {
  poly_scale_primitive(a);
  poly_scale_primitive(b);
  while (poly_degree(b) >= 0 && !(poly_degree(b) == 0 && b[0] == 0)) {
    QPoly r = poly_rem(a, b);
    poly_scale_primitive(r);
    a = std::move(b);
    b = std::move(r);
    if (poly_degree(b) < 0 || (poly_degree(b) == 0 && b[0] == 0)) break;
  }
  return a;
}

inline bool poly_squarefree(const QPoly& p) {
  QPoly g = poly_gcd(p, poly_derivative(p));
  return poly_degree(g) <= 0;
}

/// Sturm chain of a squarefree polynomial: p, p', then negated remainders.
/// Every element is rescaled to primitive integer form; positive scaling
/// keeps the sign sequence, hence the variation counts, intact.
inline std::vector<QPoly> sturm_chain(const QPoly& p) {
  std::vector<QPoly> chain{p, poly_derivative(p)};
  poly_scale_primitive(chain[0]);
  poly_scale_primitive(chain[1]);
  while (true) {
    const QPoly& a = chain[chain.size() - 2];
    const QPoly& b = chain.back();
    if (poly_degree(b) <= 0) break;
    QPoly r = poly_rem(a, b);
    if (poly_degree(r) < 0 || (poly_degree(r) == 0 && r[0] == 0)) break;
    for (auto& c : r) c = -c;
    poly_scale_primitive(r);
    chain.push_back(std::move(r));
  }
  return chain;
}

inline int sturm_variations(const std::vector<QPoly>& chain, const mpq_class& x) {
  int var = 0, prev = 0;
  for (const auto& p : chain) {
    int s = sgn(poly_eval(p, x));
    if (s == 0) continue;
    if (prev != 0 && s != prev) ++var;
    prev = s;
  }
  return var;
}

/// Number of roots in the half-open interval (a, b].
inline int sturm_count(const std::vector<QPoly>& chain, const mpq_class& a, const mpq_class& b) {
  return sturm_variations(chain, a) - sturm_variations(chain, b);
}

/// 1 + max |a_i| / |a_n|: every root has absolute value below this.
inline mpq_class cauchy_bound(const QPoly& p) {
  long d = poly_degree(p);
  mpq_class m = 0;
  for (long i = 0; i < d; ++i) {
    mpq_class a = abs(p[i] / p[d]);
    if (a > m) m = a;
  }
  return m + 1;
}

/// Disjoint isolating intervals (a, b], one real root each, ascending.
inline std::vector<std::pair<mpq_class, mpq_class>> isolate_real_roots(const QPoly& p) {
  std::vector<QPoly> chain = sturm_chain(p);
  mpq_class B = cauchy_bound(p);
  std::vector<std::pair<mpq_class, mpq_class>> out;
  std::vector<std::pair<mpq_class, mpq_class>> stack{{-B, B}};
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    int n = sturm_count(chain, a, b);
    if (n == 0) continue;
    if (n == 1) {
      out.emplace_back(a, b);
      continue;
    }
    mpq_class m = (a + b) / 2;
    stack.emplace_back(m, b);
    stack.emplace_back(a, m);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

/// Shrink an isolating interval until its width is below 2^-bits.
inline std::pair<mpq_class, mpq_class> refine_root(const std::vector<QPoly>& chain, mpq_class a,
                                                   mpq_class b, long bits) {
  mpq_class width_target(mpz_class(1), mpz_class(1) << bits);
  while (b - a > width_target) {
    mpq_class m = (a + b) / 2;
    if (sturm_count(chain, a, m) == 1)
      b = m;
    else
      a = m;
  }
  return {a, b};
}

inline std::pair<mpq_class, mpq_class> refine_root(const QPoly& p, mpq_class a, mpq_class b,
                                                   long bits) {
  return refine_root(sturm_chain(p), std::move(a), std::move(b), bits);
}

/// Horner evaluation in ball arithmetic: the result contains p(t) for every
/// t in x.
inline BallReal eval_qpoly_ball(const QPoly& p, const BallReal& x, long prec) {
  BallReal v = BallReal::from_long(0, prec);
  for (long i = (long)p.size() - 1; i >= 0; --i) {
    v = mul(v, x, prec);
    if (p[i] != 0) v = add(v, BallReal::from_mpq(p[i], prec), prec);
  }
  return v;
}

/// Interval Newton contraction of an enclosure of a simple root of p
/// (dp = p').  One step maps X to (m - p(m)/p'(X)) ∩ X with m the exact
/// midpoint of X; by the mean value theorem the root stays inside every
/// iterate, so the returned ball is a rigorous enclosure.  Converges
/// quadratically once the enclosure is tight enough.  Returns the refined
/// ball when its radius drops below 2^-bits, or nullopt when progress
/// stalls (derivative enclosure straddling zero, or precision exhausted);
/// the caller then falls back to exact bisection.
inline std::optional<BallReal> refine_root_newton(const QPoly& p, const QPoly& dp, BallReal X,
                                                  long bits) {
  long mag = mpfr_zero_p(X.mid()) ? 0 : std::max<long>(0, mpfr_get_exp(X.mid()));
  long prec = std::max<long>(192, X.prec());
  const long prec_cap = bits + 2 * mag + 320;
  detail::MpfrTmp tol(32);
  mpfr_set_ui_2exp(tol, 1, -bits, MPFR_RNDN);
  int stalls = 0;
  for (int iter = 0; iter < 200; ++iter) {
    if (mpfr_cmp(X.rad(), (mpfr_srcptr)tol) <= 0) return X;
    // exact midpoint as a radius-0 ball (precision at least X's, so the
    // construction introduces no rounding and m certainly lies in X)
    BallReal m = BallReal::from_endpoints(X.mid(), X.mid(), std::max(prec, X.prec()));
    BallReal fX = eval_qpoly_ball(dp, X, prec);
    bool shrunk = false;
    if (fX.is_nonzero()) {
      BallReal fm = eval_qpoly_ball(p, m, prec);
      BallReal cand = sub(m, div(fm, fX, prec), prec);
      long ep = std::max(prec, X.prec()) + kRadiusPrec;
      detail::MpfrTmp lo_c(ep), hi_c(ep), lo_x(ep), hi_x(ep);
      cand.get_lower(lo_c);
      cand.get_upper(hi_c);
      X.get_lower(lo_x);
      X.get_upper(hi_x);
      if (mpfr_cmp((mpfr_srcptr)lo_c, (mpfr_srcptr)lo_x) > 0) mpfr_set(lo_x, lo_c, MPFR_RNDD);
      if (mpfr_cmp((mpfr_srcptr)hi_c, (mpfr_srcptr)hi_x) < 0) mpfr_set(hi_x, hi_c, MPFR_RNDU);
      if (mpfr_cmp((mpfr_srcptr)lo_x, (mpfr_srcptr)hi_x) > 0) return std::nullopt;
      BallReal next = BallReal::from_endpoints(lo_x, hi_x, prec);
      detail::MpfrTmp half(kRadiusPrec);
      mpfr_div_2ui(half, X.rad(), 1, MPFR_RNDD);
      shrunk = mpfr_cmp(next.rad(), (mpfr_srcptr)half) <= 0;
      X = std::move(next);
    }
    if (shrunk) {
      stalls = 0;
    } else {
      if (prec >= prec_cap || ++stalls > 10) {
        if (mpfr_cmp(X.rad(), (mpfr_srcptr)tol) <= 0) return X;
        return std::nullopt;
      }
      prec = std::min(prec_cap, 2 * prec);
    }
  }
  if (mpfr_cmp(X.rad(), (mpfr_srcptr)tol) <= 0) return X;
  return std::nullopt;
}

/// Ball guaranteed to contain the root isolated by the exact interval (a, b].
inline BallReal interval_ball(const mpq_class& a, const mpq_class& b, long bits) {
  BallReal bl = BallReal::from_mpq(a, bits + 64);
  BallReal bh = BallReal::from_mpq(b, bits + 64);
  detail::MpfrTmp l(bits + 96), h(bits + 96);
  bl.get_lower(l);
  bh.get_upper(h);
  return BallReal::from_endpoints(l, h, bits + 64);
}

/// Ball guaranteed to contain the root isolated by (a, b].
inline BallReal root_ball(const QPoly& p, const mpq_class& a, const mpq_class& b, long bits) {
  auto [lo, hi] = refine_root(p, a, b, bits);
  return interval_ball(lo, hi, bits);
}

/// Characteristic polynomial of a square rational matrix, monic, low degree
/// first (Faddeev–LeVerrier; division-free apart from the exact /k).
inline QPoly charpoly(const std::vector<std::vector<mpq_class>>& A) {
  long n = (long)A.size();
  QPoly c(n + 1);
  c[n] = 1;
  if (n == 0) return c;
  std::vector<std::vector<mpq_class>> M(n, std::vector<mpq_class>(n, 0));
  for (long i = 0; i < n; ++i) M[i][i] = 1;
  for (long k = 1; k <= n; ++k) {
    // M <- A * M
    std::vector<std::vector<mpq_class>> AM(n, std::vector<mpq_class>(n, 0));
    for (long i = 0; i < n; ++i)
      for (long l = 0; l < n; ++l) {
        if (A[i][l] == 0) continue;
        for (long j = 0; j < n; ++j) AM[i][j] += A[i][l] * M[l][j];
      }
    M = std::move(AM);
    mpq_class tr = 0;
    for (long i = 0; i < n; ++i) tr += M[i][i];
    c[n - k] = -tr / k;
    if (k < n)
      for (long i = 0; i < n; ++i) M[i][i] += c[n - k];
  }
  return c;
}

} // namespace hecke
