#pragma once

#include <gmpxx.h>

#include <vector>

#include "hecke/errors.hpp"

namespace hecke {

/// Dense power series / polynomial coefficients, index = exponent of q.
using ZSeries = std::vector<mpz_class>;
using QSeries = std::vector<mpq_class>;

/// B_0..B_n by the defining recurrence sum_{j=0}^{m} C(m+1,j) B_j = 0
/// (so B_1 = -1/2).
inline std::vector<mpq_class> bernoulli_list(long n) {
  std::vector<mpq_class> b(n + 1);
  b[0] = 1;
  mpz_class binom;
  for (long m = 1; m <= n; ++m) {
    mpq_class s = 0;
    for (long j = 0; j < m; ++j) {
      mpz_bin_uiui(binom.get_mpz_t(), m + 1, j);
      s += binom * b[j];
    }
    b[m] = -s / (m + 1);
  }
  return b;
}

inline mpq_class bernoulli(long n) { return bernoulli_list(n)[n]; }

/// sum of d^r over divisors d of n
inline mpz_class sigma(unsigned long n, unsigned long r) {
  mpz_class s = 0, dp;
  for (unsigned long d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    mpz_ui_pow_ui(dp.get_mpz_t(), d, r);
    s += dp;
    unsigned long e = n / d;
    if (e != d) {
      mpz_ui_pow_ui(dp.get_mpz_t(), e, r);
      s += dp;
    }
  }
  return s;
}

/// c[0..M] of a*b (schoolbook; lengths here stay small enough that fancier
/// multiplication is not worth the complexity)
inline ZSeries mul_trunc(const ZSeries& a, const ZSeries& b, long M) {
  ZSeries c(M + 1);
  long alen = (long)a.size(), blen = (long)b.size();
  for (long i = 0; i < alen && i <= M; ++i) {
    if (a[i] == 0) continue;
    long jmax = std::min<long>(blen - 1, M - i);
    for (long j = 0; j <= jmax; ++j) {
      if (b[j] == 0) continue;
      mpz_addmul(c[i + j].get_mpz_t(), a[i].get_mpz_t(), b[j].get_mpz_t());
    }
  }
  return c;
}

inline ZSeries pow_trunc(const ZSeries& a, unsigned long e, long M) {
  ZSeries r{1};
  ZSeries base = a;
  if (e == 0) {
    r.resize(M + 1);
    return r;
  }
  bool r_is_one = true;
  while (e) {
    if (e & 1) {
      r = r_is_one ? ZSeries(base.begin(), base.begin() + std::min<size_t>(base.size(), M + 1))
                   : mul_trunc(r, base, M);
      r_is_one = false;
    }
    e >>= 1;
    if (e) base = mul_trunc(base, base, M);
  }
  r.resize(M + 1);
  return r;
}

/// Euler product prod_{n=1}^{M} (1 - q^n) truncated at q^M, by sparse
/// in-place updates.
inline ZSeries euler_product(long M) {
  ZSeries f(M + 1);
  f[0] = 1;
  for (long n = 1; n <= M; ++n)
    for (long i = M; i >= n; --i) f[i] -= f[i - n];
  return f;
}

} // namespace hecke
