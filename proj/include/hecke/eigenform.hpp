#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "hecke/ball.hpp"
#include "hecke/polynomial.hpp"
#include "hecke/qexp.hpp"

namespace hecke {

/// Exact coefficients ingested from a file (or remote cache): the only
/// coefficient source for levels > 1.
struct FileCoefficients {
  long level = 1;
  long weight = 0;
  QSeries an;               // an[n] = a_n; an[0] = 0; normalized: an[1] = 1
  int atkin_lehner_sign = 0; // +1 / -1 when known, else 0
  long length() const { return (long)an.size() - 1; }
};

/// Identifies an eigenform. Level-1 handles are self-sufficient (the basis
/// engine computes everything); other levels carry their coefficients.
struct EigenformHandle {
  long level = 1;
  long weight = 12;
  long embedding = 0;
  std::shared_ptr<const FileCoefficients> file; // null = computed level 1

  bool from_file() const { return file != nullptr; }
};

inline long eigenform_dim(const EigenformHandle& f) {
  return f.from_file() ? 1 : cusp_dim(f.weight);
}

namespace detail {

inline BallReal tight_ball(const mpq_class& v, long prec) {
  if (v.get_den() == 1) return BallReal::exact_int(v.get_num(), prec);
  long mag = (long)mpz_sizeinbase(v.get_num().get_mpz_t(), 2) -
             (long)mpz_sizeinbase(v.get_den().get_mpz_t(), 2) + 2;
  long use = std::max(prec, mag + prec / 2 + 16);
  return BallReal::from_mpq(v, use);
}

// Generating Hecke operator for a dim >= 2 space: first prime whose matrix
// has a squarefree characteristic polynomial. Root intervals are refined in
// place under the lock, so repeated evaluations at growing precision resume
// from the tightest interval computed so far.
struct EigenSystem {
  long gen_prime = 2;
  std::vector<std::vector<mpq_class>> A;
  QPoly chi;
  QPoly dchi;                                         // derivative of chi
  std::vector<QPoly> chain;                           // Sturm chain of chi
  std::vector<std::pair<mpq_class, mpq_class>> roots; // isolating intervals, ascending
  std::vector<BallReal> enclosures;                   // cached refined root balls
  std::vector<long> enclosure_bits;                   // accuracy achieved per root
  std::mutex mu;
};

inline std::shared_ptr<EigenSystem> build_eigensystem(long k) {
  static std::mutex table_mu;
  static std::map<long, std::shared_ptr<EigenSystem>> table;
  {
    std::lock_guard<std::mutex> lock(table_mu);
    auto it = table.find(k);
    if (it != table.end()) return it->second;
  }
  static const long primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  long dim = cusp_dim(k);
  auto sys = std::make_shared<EigenSystem>();
  bool found = false;
  for (long t : primes) {
    auto Z = hecke_matrix(k, t, dim);
    sys->A.assign(dim, std::vector<mpq_class>(dim));
    for (long i = 0; i < dim; ++i)
      for (long j = 0; j < dim; ++j) sys->A[i][j] = Z[i][j];
    sys->chi = charpoly(sys->A);
    if (poly_squarefree(sys->chi)) {
      sys->gen_prime = t;
      sys->dchi = poly_derivative(sys->chi);
      sys->chain = sturm_chain(sys->chi);
      sys->roots = isolate_real_roots(sys->chi);
      if ((long)sys->roots.size() != dim)
        throw Error("eigensystem: expected all-real spectrum", 1);
      sys->enclosures.assign(dim, BallReal());
      sys->enclosure_bits.assign(dim, 0);
      found = true;
      break;
    }
  }
  if (!found)
    throw NonSquarefreeCharPoly("weight " + std::to_string(k) +
                                ": no squarefree generator among the first 10 primes");
  std::lock_guard<std::mutex> lock(table_mu);
  auto [it, inserted] = table.emplace(k, sys);
  return it->second;
}

// Root of the generating operator's characteristic polynomial, enclosed in
// a ball with radius below 2^-bits.  Exact Sturm bisection supplies a short
// anchor; interval Newton carries it to full accuracy (quadratic, so high
// precision costs only a handful of ball evaluations where bisection would
// need one exact chain evaluation per bit).  Enclosures are cached and
// resumed, so repeated calls at growing accuracy pay only the increment.
inline BallReal system_root(EigenSystem& sys, long idx, long bits) {
  constexpr long kAnchorBits = 48;
  std::lock_guard<std::mutex> lock(sys.mu);
  if (sys.enclosure_bits[idx] >= bits) return sys.enclosures[idx];
  auto& iv = sys.roots[idx];
  if (sys.enclosure_bits[idx] == 0) {
    iv = refine_root(sys.chain, iv.first, iv.second, kAnchorBits);
    sys.enclosures[idx] = interval_ball(iv.first, iv.second, kAnchorBits);
    sys.enclosure_bits[idx] = kAnchorBits;
    if (bits <= kAnchorBits) return sys.enclosures[idx];
  }
  long anchor = kAnchorBits;
  BallReal X = sys.enclosures[idx];
  for (int attempt = 0; attempt < 8; ++attempt) {
    auto refined = refine_root_newton(sys.chi, sys.dchi, X, bits);
    if (refined) {
      sys.enclosures[idx] = std::move(*refined);
      sys.enclosure_bits[idx] = bits;
      return sys.enclosures[idx];
    }
    // Newton stalled: deepen the exact anchor and try again.
    anchor += 32;
    iv = refine_root(sys.chain, iv.first, iv.second, anchor);
    X = interval_ball(iv.first, iv.second, anchor);
  }
  iv = refine_root(sys.chain, iv.first, iv.second, bits);
  sys.enclosures[idx] = interval_ball(iv.first, iv.second, bits);
  sys.enclosure_bits[idx] = bits;
  return sys.enclosures[idx];
}

// Solve (A - theta I) v = 0 with v_1 = 1 by ball Gaussian elimination on
// d-1 unknowns, dropping row `drop`; empty result when a pivot cannot be
// certified nonzero.
inline std::optional<std::vector<BallReal>> eigenvector_drop(
    const std::vector<std::vector<mpq_class>>& A, const BallReal& theta, long drop, long prec) {
  long d = (long)A.size();
  std::vector<std::vector<BallReal>> rows;
  std::vector<BallReal> rhs;
  for (long r = 0; r < d; ++r) {
    if (r == drop) continue;
    std::vector<BallReal> row;
    for (long c = 1; c < d; ++c) {
      BallReal e = tight_ball(A[r][c], prec);
      if (c == r) e = sub(e, theta, prec);
      row.push_back(std::move(e));
    }
    rows.push_back(std::move(row));
    BallReal b = tight_ball(A[r][0], prec);
    if (r == 0) b = sub(b, theta, prec);
    rhs.push_back(neg(b));
  }
  long n = d - 1;
  for (long p = 0; p < n; ++p) {
    long sel = -1;
    for (long r = p; r < n; ++r)
      if (rows[r][p].is_nonzero()) {
        if (sel < 0 || mpfr_cmpabs(rows[r][p].mid(), rows[sel][p].mid()) > 0) sel = r;
      }
    if (sel < 0) return std::nullopt;
    std::swap(rows[p], rows[sel]);
    std::swap(rhs[p], rhs[sel]);
    for (long r = p + 1; r < n; ++r) {
      if (rows[r][p].contains_zero() && rows[r][p].is_exact()) continue;
      BallReal f = div(rows[r][p], rows[p][p], prec);
      for (long c = p; c < n; ++c) rows[r][c] = sub(rows[r][c], mul(f, rows[p][c], prec), prec);
      rhs[r] = sub(rhs[r], mul(f, rhs[p], prec), prec);
    }
  }
  std::vector<BallReal> v(n);
  for (long r = n - 1; r >= 0; --r) {
    BallReal s = rhs[r];
    for (long c = r + 1; c < n; ++c) s = sub(s, mul(rows[r][c], v[c], prec), prec);
    if (!rows[r][r].is_nonzero()) return std::nullopt;
    v[r] = div(s, rows[r][r], prec);
  }
  return v;
}

// Full eigenvector (v_1 = 1 first) with a residual check on the dropped row.
inline std::optional<std::vector<BallReal>> eigenvector(
    const std::vector<std::vector<mpq_class>>& A, const BallReal& theta, long prec) {
  long d = (long)A.size();
  for (long drop = d - 1; drop >= 0; --drop) {
    auto tail = eigenvector_drop(A, theta, drop, prec);
    if (!tail) continue;
    std::vector<BallReal> v;
    v.push_back(BallReal::from_long(1, prec));
    for (auto& x : *tail) v.push_back(std::move(x));
    BallReal res(prec);
    for (long c = 0; c < d; ++c)
      res = add(res, mul(tight_ball(A[drop][c], prec), v[c], prec), prec);
    res = sub(res, mul(theta, v[drop], prec), prec);
    if (res.contains_rational(0)) return v;
  }
  return std::nullopt;
}

} // namespace detail

/// Ball containing the Hecke eigenvalue of the generating operator for the
/// given embedding, refined to about `bits` bits.
inline BallReal eigenvalue_of_generator(long k, long embedding, long bits) {
  long dim = cusp_dim(k);
  if (dim == 0) throw EmptySpace("S_" + std::to_string(k) + "(1) has dimension 0");
  if (embedding < 0 || embedding >= dim)
    throw EmbeddingOutOfRange("embedding " + std::to_string(embedding) + " for dimension " +
                              std::to_string(dim));
  auto sys = detail::build_eigensystem(k);
  return detail::system_root(*sys, embedding, bits);
}

namespace detail {

/// Balls around a_0..a_M of the selected eigenform, each radius at most
/// 2^{-prec/2}; a_0 = 0 and a_1 = 1 exactly. Uncached; see eigenform_coeffs.
inline std::vector<BallReal> eigenform_coeffs_impl(const EigenformHandle& f, long M, long prec) {
  std::vector<BallReal> out;
  out.reserve(M + 1);
  if (f.from_file()) {
    if (f.embedding != 0)
      throw EmbeddingOutOfRange("file-backed forms expose a single embedding");
    if (M > f.file->length())
      throw InsufficientLength("file provides " + std::to_string(f.file->length()) +
                               " coefficients, need " + std::to_string(M));
    for (long n = 0; n <= M; ++n) out.push_back(detail::tight_ball(f.file->an[n], prec));
    return out;
  }

  if (f.level != 1)
    throw UnsupportedLevel("level " + std::to_string(f.level) +
                           " needs a coefficient file (only level 1 is computed in-process)");
  long dim = cusp_dim(f.weight);
  if (dim == 0) throw EmptySpace("S_" + std::to_string(f.weight) + "(1) has dimension 0");
  if (f.embedding < 0 || f.embedding >= dim)
    throw EmbeddingOutOfRange("embedding " + std::to_string(f.embedding) + " for dimension " +
                              std::to_string(dim));

  CuspBasis basis = cusp_basis(f.weight, std::max(M, dim));
  if (dim == 1) {
    for (long n = 0; n <= M; ++n) out.push_back(tight_ball(basis.elements[0][n], prec));
    return out;
  }

  auto sys = build_eigensystem(f.weight);
  // size of the largest exact basis coefficient involved: the eigenvector
  // combination amplifies the eigenvalue radius by about this factor
  long coeff_bits = 1;
  for (const auto& el : basis.elements)
    for (long n = 0; n <= M; ++n) {
      long b = (long)mpz_sizeinbase(el[n].get_num().get_mpz_t(), 2);
      coeff_bits = std::max(coeff_bits, b);
    }

  long extra = 96 + coeff_bits;
  for (int attempt = 0; attempt < 8; ++attempt, extra *= 2) {
    long bits = prec + extra;
    long wp = prec / 2 + extra + 64;
    BallReal theta = system_root(*sys, f.embedding, bits);
    auto v = eigenvector(sys->A, theta, wp);
    if (!v) continue;
    out.clear();
    out.push_back(BallReal(wp));
    bool ok = true;
    MpfrTmp target(64);
    mpfr_set_ui_2exp(target, 1, -(prec / 2), MPFR_RNDN);
    for (long n = 1; n <= M && ok; ++n) {
      BallReal an(wp);
      if (n <= dim) {
        an = (*v)[n - 1];
      } else {
        for (long c = 0; c < dim; ++c)
          an = add(an, mul((*v)[c], tight_ball(basis.elements[c][n], wp), wp), wp);
      }
      if (mpfr_cmp(an.rad(), target) > 0) ok = false;
      out.push_back(std::move(an));
    }
    if (ok) return out;
  }
  throw PrecisionExhausted("eigenform_coeffs: radius target not met after retries");
}

} // namespace detail

/// Balls around a_0..a_M of the selected eigenform, each radius at most
/// 2^{-prec/2}; a_0 = 0 and a_1 = 1 exactly. Computed level-1 vectors are
/// cached per (weight, embedding) and served as prefixes, since evaluation
/// requests the same form at many truncation orders.
inline std::vector<BallReal> eigenform_coeffs(const EigenformHandle& f, long M, long prec) {
  if (f.from_file()) return detail::eigenform_coeffs_impl(f, M, prec);

  struct Entry {
    long M = -1;
    long prec = 0;
    std::vector<BallReal> coeffs;
  };
  static std::mutex mu;
  static std::map<std::pair<long, long>, Entry> cache;
  std::lock_guard<std::mutex> lock(mu);
  Entry& e = cache[{f.weight, f.embedding}];
  if (e.M < M || e.prec < prec) {
    long want_M = std::max(M, e.M);
    long want_prec = std::max(prec, e.prec);
    e.coeffs = detail::eigenform_coeffs_impl(f, want_M, want_prec);
    e.M = want_M;
    e.prec = want_prec;
  }
  return {e.coeffs.begin(), e.coeffs.begin() + (M + 1)};
}

} // namespace hecke
