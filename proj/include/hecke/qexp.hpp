#pragma once

#include <gmpxx.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "hecke/errors.hpp"
#include "hecke/series.hpp"

namespace hecke {

/// Exact Fourier expansion a_0..a_M of a level-N weight-k form.
struct QExpansion {
  long level = 1;
  long weight = 0;
  QSeries coeffs; // index n = exponent of q^n
  long length() const { return (long)coeffs.size() - 1; }
};

/// Echelonized basis of the weight-k level-1 cusp space, together with the
/// exponent pairs of the generating products Delta * E4^a * E6^b and the
/// change-of-basis matrix from those products to the echelon elements.
struct CuspBasis {
  long weight = 0;
  long length = 0;
  std::vector<QSeries> elements;
  std::vector<std::pair<long, long>> exponent_pairs; // (a, b), 4a+6b = k-12
  std::vector<std::vector<mpq_class>> transform;     // elements[i] = sum_j transform[i][j] * P_j
  long dim() const { return (long)elements.size(); }
};

inline std::vector<std::pair<long, long>> weight_exponent_pairs(long k) {
  std::vector<std::pair<long, long>> out;
  if (k < 12 || k % 2) return out;
  for (long a = 0; 4 * a <= k - 12; ++a) {
    long r = k - 12 - 4 * a;
    if (r % 6 == 0) out.emplace_back(a, r / 6);
  }
  return out;
}

inline long cusp_dim(long k) { return (long)weight_exponent_pairs(k).size(); }

namespace detail {

// E_k as an integer series for k in {4, 6}; cached because every basis and
// every long Delta expansion starts from these.
inline ZSeries eisenstein_zexp(long k, long M) {
  static std::mutex mu;
  static ZSeries cache4, cache6;
  std::lock_guard<std::mutex> lock(mu);
  ZSeries& cache = (k == 4) ? cache4 : cache6;
  long factor = (k == 4) ? 240 : -504;
  if ((long)cache.size() < M + 1) {
    long old = (long)cache.size();
    cache.resize(M + 1);
    if (old == 0) {
      cache[0] = 1;
      old = 1;
    }
    for (long n = old; n <= M; ++n) cache[n] = factor * sigma(n, k - 1);
  }
  return ZSeries(cache.begin(), cache.begin() + (M + 1));
}

inline ZSeries delta_zexp_impl(long M) {
  ZSeries e4 = eisenstein_zexp(4, M);
  ZSeries e6 = eisenstein_zexp(6, M);
  ZSeries e4_3 = mul_trunc(mul_trunc(e4, e4, M), e4, M);
  ZSeries e6_2 = mul_trunc(e6, e6, M);
  ZSeries d(M + 1);
  for (long n = 0; n <= M; ++n) {
    mpz_class diff = e4_3[n] - e6_2[n];
    mpz_divexact_ui(d[n].get_mpz_t(), diff.get_mpz_t(), 1728);
  }
  return d;
}

inline ZSeries delta_zexp(long M) {
  static std::mutex mu;
  static ZSeries cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if ((long)cache.size() >= M + 1) return ZSeries(cache.begin(), cache.begin() + (M + 1));
  }
  ZSeries fresh = delta_zexp_impl(M);
  std::lock_guard<std::mutex> lock(mu);
  if ((long)cache.size() < M + 1) cache = fresh;
  return fresh;
}

} // namespace detail

/// E_k = 1 - (2k/B_k) * sum sigma_{k-1}(n) q^n, exact rationals.
inline QExpansion eisenstein_qexp(long k, long M) {
  QExpansion e;
  e.level = 1;
  e.weight = k;
  e.coeffs.resize(M + 1);
  e.coeffs[0] = 1;
  mpq_class factor = mpq_class(-2 * k) / bernoulli(k);
  for (long n = 1; n <= M; ++n) e.coeffs[n] = factor * sigma(n, k - 1);
  return e;
}

/// Delta = (E4^3 - E6^2)/1728, normalized so a_1 = +1.
inline QExpansion delta_qexp(long M) {
  if (M < 1) throw Error("delta_qexp: need M >= 1", 1);
  QExpansion d;
  d.level = 1;
  d.weight = 12;
  ZSeries z = detail::delta_zexp(M);
  d.coeffs.assign(z.begin(), z.end());
  return d;
}

/// Independent route to Delta: q * (Euler product)^24.
inline QExpansion eta_delta_oracle(long M) {
  if (M < 1) throw Error("eta_delta_oracle: need M >= 1", 1);
  ZSeries e = euler_product(M - 1);
  ZSeries e24 = pow_trunc(e, 24, M - 1);
  QExpansion d;
  d.level = 1;
  d.weight = 12;
  d.coeffs.resize(M + 1);
  for (long n = 1; n <= M; ++n) d.coeffs[n] = e24[n - 1];
  return d;
}

namespace detail {

/// Uncached basis construction; see cusp_basis below.
inline CuspBasis cusp_basis_impl(long k, long M) {
  CuspBasis basis;
  basis.weight = k;
  basis.exponent_pairs = weight_exponent_pairs(k);
  long dim = (long)basis.exponent_pairs.size();
  if (dim == 0) throw EmptySpace("S_" + std::to_string(k) + "(1) has dimension 0");
  long len = std::max(M, dim);
  basis.length = len;

  ZSeries delta = detail::delta_zexp(len);
  std::vector<QSeries> rows;
  rows.reserve(dim);
  for (auto [a, b] : basis.exponent_pairs) {
    ZSeries prod = delta;
    if (a) prod = mul_trunc(prod, pow_trunc(detail::eisenstein_zexp(4, len), a, len), len);
    if (b) prod = mul_trunc(prod, pow_trunc(detail::eisenstein_zexp(6, len), b, len), len);
    QSeries row(prod.begin(), prod.end());
    rows.push_back(std::move(row));
  }

  basis.transform.assign(dim, std::vector<mpq_class>(dim, 0));
  for (long i = 0; i < dim; ++i) basis.transform[i][i] = 1;

  // Gauss-Jordan to reduced echelon on coefficient columns q^1..q^dim.
  for (long piv = 0; piv < dim; ++piv) {
    long col = piv + 1;
    long sel = -1;
    for (long r = piv; r < dim; ++r)
      if (rows[r][col] != 0) {
        sel = r;
        break;
      }
    if (sel < 0) throw Error("cusp_basis: echelonization found no pivot", 1);
    std::swap(rows[piv], rows[sel]);
    std::swap(basis.transform[piv], basis.transform[sel]);
    mpq_class inv = 1 / rows[piv][col];
    for (auto& c : rows[piv]) c *= inv;
    for (auto& c : basis.transform[piv]) c *= inv;
    for (long r = 0; r < dim; ++r) {
      if (r == piv || rows[r][col] == 0) continue;
      mpq_class f = rows[r][col];
      for (long n = 0; n <= len; ++n) rows[r][n] -= f * rows[piv][n];
      for (long j = 0; j < dim; ++j) basis.transform[r][j] -= f * basis.transform[piv][j];
    }
  }
  basis.elements = std::move(rows);
  return basis;
}

} // namespace detail

/// Echelonized cusp basis of S_k(1) to length M (pivots at q^1..q^dim).
/// A per-weight cache keeps the longest expansion computed so far; shorter
/// requests are served by slicing it, so repeated evaluation at varying
/// truncation orders does not redo the echelonization.
inline CuspBasis cusp_basis(long k, long M) {
  static std::mutex mu;
  static std::map<long, CuspBasis> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(k);
  if (it == cache.end() || it->second.length < M) {
    long len = M;
    if (it != cache.end()) len = std::max(len, it->second.length * 2);
    cache[k] = detail::cusp_basis_impl(k, len);
    it = cache.find(k);
  }
  const CuspBasis& full = it->second;
  long want = std::max(M, (long)full.dim());
  if (full.length == want) return full;
  CuspBasis out;
  out.weight = full.weight;
  out.length = want;
  out.exponent_pairs = full.exponent_pairs;
  out.transform = full.transform;
  out.elements.reserve(full.elements.size());
  for (const QSeries& e : full.elements)
    out.elements.emplace_back(e.begin(), e.begin() + (want + 1));
  return out;
}

/// Matrix of T_p on the echelon basis of S_k(1), read off at the pivot
/// coefficients: entry (r, c) = a_r(T_p B_c) with
/// a_n(T_p g) = a_{pn}(g) + p^{k-1} a_{n/p}(g).
inline std::vector<std::vector<mpz_class>> hecke_matrix(long k, long p, long M) {
  long dim = cusp_dim(k);
  if (dim == 0) throw EmptySpace("S_" + std::to_string(k) + "(1) has dimension 0");
  if (M < dim)
    throw InsufficientLength("hecke_matrix: length " + std::to_string(M) + " below dimension " +
                             std::to_string(dim));
  CuspBasis basis = cusp_basis(k, p * M);
  mpz_class pk1;
  mpz_ui_pow_ui(pk1.get_mpz_t(), p, k - 1);
  std::vector<std::vector<mpz_class>> A(dim, std::vector<mpz_class>(dim));
  for (long c = 0; c < dim; ++c) {
    const QSeries& g = basis.elements[c];
    for (long r = 1; r <= dim; ++r) {
      mpq_class v = g[p * r];
      if (r % p == 0) v += pk1 * g[r / p];
      if (v.get_den() != 1)
        throw Error("hecke_matrix: non-integral entry", 1);
      A[r - 1][c] = v.get_num();
    }
  }
  return A;
}

} // namespace hecke
