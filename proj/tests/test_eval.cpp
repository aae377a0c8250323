#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "hecke/eval.hpp"

using namespace hecke;
using hecke::detail::MpfrTmp;

namespace {

bool ball_meets(const BallReal& a, const BallReal& b) {
  MpfrTmp al(a.prec() + 32), au(a.prec() + 32), bl(b.prec() + 32), bu(b.prec() + 32);
  a.get_lower(al);
  a.get_upper(au);
  b.get_lower(bl);
  b.get_upper(bu);
  return mpfr_cmp(au, bl) >= 0 && mpfr_cmp(bu, al) >= 0;
}

bool ball_meets(const BallComplex& a, const BallComplex& b) {
  return ball_meets(a.re(), b.re()) && ball_meets(a.im(), b.im());
}

bool radius_at_most_q(const BallReal& b, const mpq_class& bound) {
  MpfrTmp r(128);
  mpfr_set(r, b.rad(), MPFR_RNDU);
  return mpfr_cmp_q(r, const_cast<mpq_class&>(bound).get_mpq_t()) <= 0;
}

mpq_class ten_pow(long e) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, (unsigned long)(e < 0 ? -e : e));
  return e < 0 ? mpq_class(1, p) : mpq_class(p);
}

EvalPoint point_q(const mpq_class& re, const mpq_class& im, long prec = 192) {
  return make_eval_point(BallComplex::from_mpq(re, im, prec));
}

// Independent minimal-T search with raw directed MPFR arithmetic (no ball
// layer): smallest T with  c_lo*T >= D  and  C*((D+1)/c_lo)*e^{-c_lo T}*T^D
// rounded up below eps, where c_lo is 2*pi*y rounded down.
long scan_min_T(const TailProfile& prof, const mpq_class& y, const mpq_class& eps) {
  const long prec = 256;
  MpfrTmp pi(prec), c(prec), t(prec), b(prec), K(prec);
  mpfr_const_pi(pi, MPFR_RNDD);
  mpfr_mul_ui(c, pi, 2, MPFR_RNDD);
  mpfr_mul_q(c, c, const_cast<mpq_class&>(y).get_mpq_t(), MPFR_RNDD);
  mpfr_set_q(K, const_cast<mpq_class&>(prof.C).get_mpq_t(), MPFR_RNDU);
  mpfr_mul_ui(K, K, (unsigned long)(prof.D + 1), MPFR_RNDU);
  mpfr_div(K, K, c, MPFR_RNDU);
  for (long T = 1; T <= 200000; ++T) {
    mpfr_mul_ui(t, c, (unsigned long)T, MPFR_RNDD);
    if (mpfr_cmp_ui(t, (unsigned long)prof.D) < 0) continue; // T >= D/c not certified
    mpfr_neg(t, t, MPFR_RNDU);
    mpfr_exp(b, t, MPFR_RNDU);
    mpz_class Td;
    mpz_ui_pow_ui(Td.get_mpz_t(), (unsigned long)T, (unsigned long)prof.D);
    mpfr_mul_z(b, b, Td.get_mpz_t(), MPFR_RNDU);
    mpfr_mul(b, b, K, MPFR_RNDU);
    if (mpfr_cmp_q(b, const_cast<mpq_class&>(eps).get_mpq_t()) < 0) return T;
  }
  return -1;
}

// Term-by-term (non-Horner) summation oracle: sum_{n=1}^{M} a_n q^n with
// q = e^{2 pi i z}, each power computed independently, plus a caller-supplied
// margin absorbing the neglected n > M terms.
BallComplex sum_oracle(const std::vector<mpz_class>& a, const mpq_class& x, const mpq_class& yy,
                       long M, long prec, const mpq_class& margin) {
  BallComplex z = BallComplex::from_mpq(x, yy, prec);
  BallComplex q = complex_exp(mul_i(mul_real(z, mul_2exp(pi_ball(prec), 1), prec)), prec);
  BallComplex s(prec);
  for (long n = 1; n <= M && n < (long)a.size(); ++n) {
    if (a[n] == 0) continue;
    BallComplex term = mul_real(pow_si(q, n, prec), BallReal::exact_int(a[n], prec), prec);
    s = add(s, term, prec);
  }
  BallReal mb = BallReal::from_mpq(margin, 96);
  s.re_mut().add_error(mb);
  s.im_mut().add_error(mb);
  return s;
}

std::vector<mpz_class> delta_z(long M) {
  QExpansion d = delta_qexp(M);
  std::vector<mpz_class> a(M + 1);
  for (long n = 0; n <= M; ++n) a[n] = d.coeffs[n].get_num();
  return a;
}

// q * prod (1-q^n)^{e1} * prod (1-q^{Nn})^{eN}, coefficients 0..M.
ZSeries eta_quotient(long M, long e1, long N, long eN) {
  ZSeries base = euler_product(M);
  ZSeries dil(M + 1, 0);
  for (long j = 0; N * j <= M; ++j) dil[N * j] = base[j];
  ZSeries prod = mul_trunc(pow_trunc(base, (unsigned long)e1, M),
                           pow_trunc(dil, (unsigned long)eN, M), M);
  ZSeries out(M + 1, 0);
  for (long n = 1; n <= M; ++n) out[n] = prod[n - 1];
  return out;
}

std::shared_ptr<const FileCoefficients> eta_newform_coeffs(long N, long k, long M) {
  auto fc = std::make_shared<FileCoefficients>();
  fc->level = N;
  fc->weight = k;
  long e = (N == 2) ? 8 : 6;
  ZSeries an = eta_quotient(M, e, N, e);
  fc->an.assign(an.begin(), an.end());
  return fc;
}

const AtkinLehnerSign kTrivialSign{1, 1, true};

} // namespace

TEST_CASE("coefficient growth exponent") {
  CHECK(truncation_d(12) == 7);
  CHECK(truncation_d(11) == 6);
  CHECK(truncation_d(2) == 2);
  CHECK(truncation_d(4) == 3);
  CHECK(truncation_d(24) == 13);
}

TEST_CASE("choose_truncation agrees with a brute-force scan") {
  auto lift = [](long t) { return t == 1 ? 100L : t; };
  auto run = [&](long k, const mpq_class& y, const mpq_class& eps) {
    BallReal yb = BallReal::from_mpq(y, 128);
    auto [T, tail] = choose_truncation(yb, k, BallReal::from_mpq(eps, 96));
    long Ts = lift(scan_min_T(cusp_tail_profile(k), y, eps));
    CHECK(T == Ts);
    // the returned tail is the bound expression evaluated at T
    CHECK(ball_meets(tail, truncation_tail_bound(yb, cusp_tail_profile(k), T)));
    return T;
  };

  long T_high = run(12, mpq_class(866, 1000), ten_pow(-10));
  long T_low = run(12, mpq_class(1, 2), ten_pow(-10));
  CHECK(T_low > T_high); // smaller Im needs more terms

  run(24, mpq_class(2887, 10000), ten_pow(-20));
  run(16, mpq_class(3, 2), ten_pow(-5));

  // fallback: minimal qualifying T is 1 at large Im, so T is lifted to 100
  auto [T_fb, tail_fb] = choose_truncation(BallReal::from_long(5, 96), 12,
                                           BallReal::from_mpq(mpq_class(1, 10), 96));
  CHECK(T_fb == 100);
  CHECK(scan_min_T(cusp_tail_profile(12), 5, mpq_class(1, 10)) == 1);
  CHECK(tail_fb.sign() > 0);

  // Eisenstein profile goes through the same machinery
  auto [T_e, tail_e] = choose_truncation_profile(BallReal::from_long(1, 96),
                                                 eisenstein_tail_profile(4),
                                                 BallReal::from_mpq(ten_pow(-25), 96));
  CHECK(tail_e.sign() > 0);
  CHECK(T_e == lift(scan_min_T(eisenstein_tail_profile(4), 1, ten_pow(-25))));

  std::mt19937_64 rng(20260825);
  for (int it = 0; it < 10; ++it) {
    mpq_class y(300 + (long)(rng() % 2700), 1000);
    mpq_class eps = ten_pow(-(long)(3 + rng() % 22));
    long k = 12 + 2 * (long)(rng() % 8);
    run(k, y, eps);
  }

  CHECK_THROWS_AS(choose_truncation(BallReal::from_long(1, 96), 12, BallReal(96)),
                  NonPositiveAccuracy);
  CHECK_THROWS_AS(choose_truncation(BallReal(96), 12, BallReal::from_long(1, 96)),
                  NonPositiveImaginaryPart);
}

TEST_CASE("tail bound dominates the true tail") {
  const long M = 5000;
  std::vector<mpz_class> a = delta_z(M);
  std::mt19937_64 rng(7);
  const long prec = 320;
  for (int it = 0; it < 12; ++it) {
    mpq_class y(300 + (long)(rng() % 2700), 1000);
    mpq_class eps = (it % 2) ? ten_pow(-4) : ten_pow(-12);
    BallReal yb = BallReal::from_mpq(y, 160);
    auto [T, tail] = choose_truncation(yb, 12, BallReal::from_mpq(eps, 96));
    REQUIRE(T < M);

    BallReal q = exp_ball(neg(mul(mul_2exp(pi_ball(prec), 1), BallReal::from_mpq(y, prec), prec)),
                          prec);
    for (long extra : {0L, 7L, 50L}) {
      long Tx = T + extra;
      BallReal bound = (extra == 0) ? tail : truncation_tail_bound(yb, cusp_tail_profile(12), Tx);
      BallReal s(prec);
      for (long n = Tx + 1; n <= M; ++n) {
        BallReal t = mul(BallReal::exact_int(a[n], prec), pow_ui(q, (unsigned long)n, prec), prec);
        s = add(s, abs_ball(t), prec);
      }
      // |a_n| <= n^7 and q^5000 <= e^{-2*pi*0.3*5000}: the n > 5000 remainder
      // is far below 2^{-4000}
      s.add_error_2exp(-4000);
      MpfrTmp su(prec), bu(prec);
      s.get_upper(su);
      bound.get_upper(bu);
      CHECK(mpfr_cmp(su, bu) <= 0);
    }
  }
}

TEST_CASE("reduce_point: frozen examples") {
  SECTION("0.25i inverts to 4i for k = 12") {
    EvalPlan plan = reduce_point(point_q(0, mpq_class(1, 4)), 1, 12, kTrivialSign, 192);
    CHECK_FALSE(plan.used_wN);
    CHECK(plan.reduced_point.z.re().is_exact());
    CHECK(plan.reduced_point.z.re().contains_rational(0));
    CHECK(plan.reduced_point.z.im().contains_rational(4));
    // (0.25 i)^{-12} = 4^{12} = 16777216, purely real
    CHECK(plan.factor.re().contains_rational(mpq_class(16777216)));
    CHECK(plan.factor.im().contains_rational(0));
    CHECK(radius_at_most_q(plan.factor.re(), mpq_class(1, 1000000)));
  }

  SECTION("0.3 + 0.9i lies inside the unit circle, so S applies") {
    mpq_class x(3, 10), yv(9, 10);
    EvalPlan plan = reduce_point(point_q(x, yv), 1, 12, kTrivialSign, 192);
    CHECK(plan.reduced_point.z.im().contains_rational(1)); // 0.9 / 0.9
    CHECK(plan.reduced_point.z.re().contains_rational(mpq_class(-1, 3)));
    // factor * z^12 = 1
    BallComplex z = BallComplex::from_mpq(x, yv, 192);
    BallComplex back = mul(plan.factor, pow_si(z, 12, 192), 192);
    CHECK(back.re().contains_rational(1));
    CHECK(back.im().contains_rational(0));
  }

  SECTION("0.1i at level 2, weight 8 maps to 5i with W_2") {
    AtkinLehnerSign s2{2, 1, true};
    EvalPlan plan = reduce_point(point_q(0, mpq_class(1, 10)), 2, 8, s2, 192);
    CHECK(plan.used_wN);
    CHECK(plan.reduced_point.z.im().contains_rational(5));
    CHECK(plan.reduced_point.z.re().contains_rational(0));
    // 2^{(2-8)/2} * 2^7 * (0.2 i)^{-8} = 2^{-3} * 2^7 * 5^8 = 16 * 390625
    CHECK(plan.factor.re().contains_rational(mpq_class(6250000)));
    CHECK(plan.factor.im().contains_rational(0));

    AtkinLehnerSign uncertified{2, 1, false};
    CHECK_THROWS_AS(reduce_point(point_q(0, mpq_class(1, 10)), 2, 8, uncertified, 192),
                    IndeterminateSign);
  }

  SECTION("translation by several periods") {
    EvalPlan plan = reduce_point(point_q(mpq_class(11, 2), 2), 1, 12, kTrivialSign, 192);
    CHECK(plan.reduced_point.z.im().contains_rational(2));
    CHECK(plan.reduced_point.z.re().contains_rational(mpq_class(-1, 2)));
    CHECK(plan.factor.re().contains_rational(1));
    CHECK(plan.factor.im().contains_rational(0));
  }

  SECTION("exact half-integer real part terminates untouched") {
    EvalPlan plan = reduce_point(point_q(mpq_class(1, 2), 3), 1, 12, kTrivialSign, 192);
    CHECK(plan.reduced_point.z.re().contains_rational(mpq_class(1, 2)));
    CHECK(plan.reduced_point.z.im().contains_rational(3));
  }

  SECTION("boundary straddle: fatal low, harmless high") {
    // N = 2: the ball straddles 2|z|^2 = 1 at z = (1+i)/2 once fattened, and
    // Im is below the acceptance threshold
    AtkinLehnerSign s2{2, 1, true};
    BallComplex low = BallComplex::from_mpq(mpq_class(1, 2), mpq_class(1, 2), 96);
    low.im_mut().add_error_2exp(-12);
    CHECK_THROWS_AS(reduce_point(make_eval_point(low), 2, 8, s2, 96), UncertainRegion);

    // N = 1: |z|^2 straddles 1 on the unit circle, but Im ~ 0.87 is high
    // enough that the point is accepted without inversion
    BallComplex high = BallComplex::from_mpq(mpq_class(1, 2), mpq_class(0), 96);
    {
      MpfrTmp s3(128);
      mpfr_sqrt_ui(s3, 3, MPFR_RNDN);
      mpfr_div_2ui(s3, s3, 1, MPFR_RNDN);
      BallReal imv = BallReal::from_endpoints(s3, s3, 96);
      imv.add_error_2exp(-12);
      high = BallComplex(high.re(), imv);
    }
    EvalPlan plan = reduce_point(make_eval_point(high), 1, 12, kTrivialSign, 96);
    CHECK_FALSE(plan.used_wN);
    CHECK(plan.factor.re().contains_rational(1));
    CHECK(plan.factor.im().contains_rational(0));
  }
}

TEST_CASE("reduction does not decrease the imaginary part") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 60; ++it) {
    mpq_class x((long)(rng() % 4001) - 2000, 1000);
    mpq_class yv(50 + (long)(rng() % 1200), 1000);
    long N = 1 + (long)(rng() % 3);
    long k = (N == 1) ? 12 : (N == 2 ? 8 : 6);
    AtkinLehnerSign s{N, 1, true};
    EvalPlan plan;
    try {
      plan = reduce_point(point_q(x, yv, 256), N, k, s, 256);
    } catch (const UncertainRegion&) {
      continue; // measure-zero boundary hit
    }
    MpfrTmp before(288), after(288);
    BallReal yin = BallReal::from_mpq(yv, 256);
    yin.get_lower(before);
    plan.reduced_point.z.im().get_upper(after);
    CHECK(mpfr_cmp(after, before) >= 0);
  }
}

TEST_CASE("truncated evaluation matches independent summation") {
  SECTION("Delta at i") {
    BallReal y1 = BallReal::from_long(1, 192);
    auto [T, tail] = choose_truncation(y1, 12, BallReal::from_mpq(ten_pow(-25), 96));
    QExpansion d = delta_qexp(T);
    std::vector<BallReal> coeffs;
    for (long n = 0; n <= T; ++n) coeffs.push_back(BallReal::exact_int(d.coeffs[n].get_num(), 192));
    BallComplex v = evaluate_truncated(coeffs, point_q(0, 1), T, tail, 192);

    BallComplex oracle = sum_oracle(delta_z(2000), 0, 1, 2000, 512, ten_pow(-1000));
    CHECK(ball_meets(v, oracle));
    CHECK(v.im().contains_rational(0));
    // near 0.00178537...
    BallReal window = BallReal::from_mpq(mpq_class(178537, 100000000), 96);
    window.add_error(BallReal::from_mpq(ten_pow(-8), 96));
    CHECK(ball_meets(v.re(), window));
  }

  SECTION("E4 at i equals 3 Gamma(1/4)^8 / (2 pi)^6") {
    BallReal y1 = BallReal::from_long(1, 192);
    auto [T, tail] =
        choose_truncation_profile(y1, eisenstein_tail_profile(4), BallReal::from_mpq(ten_pow(-25), 96));
    QExpansion e4 = eisenstein_qexp(4, T);
    std::vector<BallReal> coeffs;
    for (long n = 0; n <= T; ++n) coeffs.push_back(BallReal::from_mpq(e4.coeffs[n], 192));
    BallComplex v = evaluate_truncated(coeffs, point_q(0, 1), T, tail, 192);

    const long gp = 512;
    MpfrTmp g(gp), pi2(gp), den(gp);
    mpfr_set_q(g, mpq_class(1, 4).get_mpq_t(), MPFR_RNDN);
    mpfr_gamma(g, g, MPFR_RNDN);
    mpfr_pow_ui(g, g, 8, MPFR_RNDN);
    mpfr_mul_ui(g, g, 3, MPFR_RNDN);
    mpfr_const_pi(pi2, MPFR_RNDN);
    mpfr_mul_ui(pi2, pi2, 2, MPFR_RNDN);
    mpfr_pow_ui(den, pi2, 6, MPFR_RNDN);
    mpfr_div(g, g, den, MPFR_RNDN);
    BallReal closed = BallReal::from_endpoints(g, g, gp);
    closed.add_error_2exp(-480);
    CHECK(ball_meets(v.re(), closed));
    CHECK(v.im().contains_rational(0));
    // sanity on the leading digits 1.4557629...
    BallReal window = BallReal::from_mpq(mpq_class(14557629, 10000000), 96);
    window.add_error(BallReal::from_mpq(ten_pow(-6), 96));
    CHECK(ball_meets(v.re(), window));
  }

  SECTION("T = 0 keeps a_0 and the tail radius") {
    std::vector<BallReal> coeffs{BallReal::from_long(1, 96)};
    BallReal tail = BallReal::from_mpq(mpq_class(1, 2), 96);
    BallComplex v = evaluate_truncated(coeffs, point_q(0, 1), 0, tail, 96);
    CHECK(v.re().contains_rational(1));
    CHECK(v.im().contains_rational(0));
    CHECK(v.re().contains_rational(mpq_class(13, 10))); // radius >= 1/2
  }
}

TEST_CASE("evaluate_form at i, periodicity, inversion route") {
  EigenformHandle delta{1, 12, 0, nullptr};
  BallReal eps = BallReal::from_mpq(ten_pow(-20), 96);

  long T1 = 0;
  BallComplex v1 = evaluate_form(delta, point_q(0, 1), eps, kTrivialSign, &T1);
  CHECK(v1.im().contains_rational(0));
  CHECK(radius_at_most_q(v1.re(), ten_pow(-20)));
  CHECK(radius_at_most_q(v1.im(), ten_pow(-20)));
  CHECK(T1 >= 1);
  BallComplex oracle_i = sum_oracle(delta_z(2000), 0, 1, 2000, 512, ten_pow(-1000));
  CHECK(ball_meets(v1, oracle_i));

  // periodicity: z = i + 1 reduces to the identical computation
  BallComplex v2 = evaluate_form(delta, point_q(1, 1), eps, kTrivialSign);
  CHECK(mpfr_cmp(v1.re().mid(), v2.re().mid()) == 0);
  CHECK(mpfr_cmp(v1.re().rad(), v2.re().rad()) == 0);
  CHECK(mpfr_cmp(v1.im().mid(), v2.im().mid()) == 0);

  // z = 0.05i goes through the inversion route (reduced to 20i, T lifted to 100)
  long T3 = 0;
  BallReal eps10 = BallReal::from_mpq(ten_pow(-10), 96);
  BallComplex v3 = evaluate_form(delta, point_q(0, mpq_class(1, 20)), eps10, kTrivialSign, &T3);
  CHECK(T3 == 100);
  BallComplex oracle_small =
      sum_oracle(delta_z(2000), 0, mpq_class(1, 20), 2000, 400, ten_pow(-200));
  CHECK(ball_meets(v3, oracle_small));
  CHECK(v3.im().contains_rational(0));
  CHECK(radius_at_most_q(v3.re(), ten_pow(-10)));

  CHECK_THROWS_AS(evaluate_form(delta, point_q(0, 1), BallReal(96), kTrivialSign),
                  NonPositiveAccuracy);
}

TEST_CASE("mirror realness and conjugate symmetry") {
  EigenformHandle delta{1, 12, 0, nullptr};
  BallReal eps = BallReal::from_mpq(ten_pow(-12), 96);

  for (long den : {2L, 3L, 5L}) {
    BallComplex v = evaluate_form(delta, point_q(0, mpq_class(7, den)), eps, kTrivialSign);
    CHECK(v.im().contains_rational(0));
  }

  // f(-conj(z)) = conj(f(z)) for real coefficients
  struct Pt {
    mpq_class x, y;
  } pts[] = {{mpq_class(3, 10), mpq_class(9, 10)},
             {mpq_class(1, 3), mpq_class(1, 1)},
             {mpq_class(2, 5), mpq_class(7, 5)}};
  for (const auto& p : pts) {
    BallComplex a = evaluate_form(delta, point_q(p.x, p.y), eps, kTrivialSign);
    BallComplex b = evaluate_form(delta, point_q(-p.x, p.y), eps, kTrivialSign);
    CHECK(ball_meets(b, conj(a)));
  }

  // Hecke-point pairing shape: (i y + b)/p against (i y - b)/p
  BallComplex plus = evaluate_form(delta, point_q(mpq_class(1, 3), mpq_class(1, 3)), eps,
                                   kTrivialSign);
  BallComplex minus = evaluate_form(delta, point_q(mpq_class(-1, 3), mpq_class(1, 3)), eps,
                                    kTrivialSign);
  CHECK(ball_meets(minus, conj(plus)));
}

namespace {

struct QC {
  mpq_class re, im;
};

QC qc_mul(const QC& a, const QC& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

QC qc_div(const QC& a, const QC& b) {
  mpq_class n = b.re * b.re + b.im * b.im;
  QC c = qc_mul(a, {b.re, -b.im});
  return {c.re / n, c.im / n};
}

// gamma = [[a, b], [c, d]], det 1; returns (gamma z, cz + d)
std::pair<QC, QC> apply_moebius(long a, long b, long c, long d, const QC& z) {
  QC num{a * z.re + b, a * z.im};
  QC den{c * z.re + d, c * z.im};
  return {qc_div(num, den), den};
}

// random det-1 matrix with |c| <= cmax and c divisible by N
std::array<long, 4> random_gamma(std::mt19937_64& rng, long N, long cmax) {
  for (;;) {
    long c = N * ((long)(rng() % (2 * (cmax / N) + 1)) - cmax / N);
    long d = (long)(rng() % 21) - 10;
    if (d == 0 && c == 0) continue;
    mpz_class g, s, t;
    mpz_class zc(c), zd(d);
    mpz_gcdext(g.get_mpz_t(), s.get_mpz_t(), t.get_mpz_t(), zd.get_mpz_t(), zc.get_mpz_t());
    if (g != 1 && g != -1) continue;
    // s*d + t*c = g; want a*d - b*c = 1
    mpz_class a = s * (g == 1 ? 1 : -1);
    mpz_class bb = -t * (g == 1 ? 1 : -1);
    if (!a.fits_slong_p() || !bb.fits_slong_p()) continue;
    long al = a.get_si(), bl = bb.get_si();
    if (al * d - bl * c != 1) continue;
    if (std::abs(al) > 50 || std::abs(bl) > 50 || std::abs(c) > 50 || std::abs(d) > 50) continue;
    return {al, bl, c, d};
  }
}

} // namespace

TEST_CASE("modularity residual under the full modular group") {
  std::mt19937_64 rng(424242);
  EigenformHandle forms[] = {{1, 12, 0, nullptr}, {1, 24, 0, nullptr}, {1, 24, 1, nullptr}};
  for (const auto& f : forms) {
    for (int it = 0; it < 4; ++it) {
      auto [a, b, c, d] = random_gamma(rng, 1, 12);
      QC z{mpq_class((long)(rng() % 1001) - 500, 1000), mpq_class(800 + (long)(rng() % 700), 1000)};
      auto [gz, den] = apply_moebius(a, b, c, d, z);

      double den_abs = std::sqrt(den.re.get_d() * den.re.get_d() + den.im.get_d() * den.im.get_d());
      double scale = std::pow(den_abs, (double)f.weight);
      long digits = std::max(6L, (long)(6 + std::log10(std::max(1.0, scale))));

      BallReal eps_gz = BallReal::from_mpq(ten_pow(-6), 96);
      BallReal eps_z = BallReal::from_mpq(ten_pow(-digits), 96);
      BallComplex lhs = evaluate_form(f, point_q(gz.re, gz.im, 256), eps_gz, kTrivialSign);
      BallComplex fz = evaluate_form(f, point_q(z.re, z.im, 256), eps_z, kTrivialSign);
      BallComplex denb = BallComplex::from_mpq(den.re, den.im, 256);
      BallComplex rhs = mul(pow_si(denb, f.weight, 256), fz, 256);
      CHECK(ball_meets(lhs, rhs));
    }
  }
}

TEST_CASE("eta newforms at levels 2 and 3: prefixes, signs, modularity") {
  auto f2c = eta_newform_coeffs(2, 8, 600);
  auto f3c = eta_newform_coeffs(3, 6, 600);

  const long want2[] = {1, -8, 12, 64, -210, -96, 1016, -512, -2043, 1680, 1092, 768};
  const long want3[] = {1, -6, 9, 4, 6, -54, -40, 168, 81, -36, -564, 36};
  for (int n = 1; n <= 12; ++n) {
    CHECK(f2c->an[n] == want2[n - 1]);
    CHECK(f3c->an[n] == want3[n - 1]);
  }

  EigenformHandle f2{2, 8, 0, f2c};
  EigenformHandle f3{3, 6, 0, f3c};
  BallReal eps8 = BallReal::from_mpq(ten_pow(-8), 96);

  AtkinLehnerSign s2 = atkin_lehner_sign(f2, 2, eps8);
  AtkinLehnerSign s3 = atkin_lehner_sign(f3, 3, eps8);
  CHECK(s2.certified);
  CHECK(s3.certified);

  // independent raw-MPFR sign oracle at z* = 2i:
  // sign = [N^{k/2} (2N)^{-k} (-1)^{k/2} * f(i/(2N))] / f(2i)
  auto oracle_sign = [](const FileCoefficients& fc) {
    long N = fc.level, k = fc.weight;
    const long prec = 256;
    MpfrTmp pi(prec), qa(prec), qb(prec), A(prec), B(prec), t(prec);
    mpfr_const_pi(pi, MPFR_RNDN);
    mpfr_mul_si(qa, pi, -4, MPFR_RNDN);
    mpfr_exp(qa, qa, MPFR_RNDN); // e^{-4 pi}
    mpfr_div_si(qb, pi, -N, MPFR_RNDN);
    mpfr_exp(qb, qb, MPFR_RNDN); // e^{-pi/N}
    mpfr_set_ui(A, 0, MPFR_RNDN);
    mpfr_set_ui(B, 0, MPFR_RNDN);
    for (long n = 1; n <= fc.length(); ++n) {
      if (fc.an[n] == 0) continue;
      mpfr_pow_ui(t, qa, (unsigned long)n, MPFR_RNDN);
      mpfr_mul_q(t, t, const_cast<mpq_class&>(fc.an[n]).get_mpq_t(), MPFR_RNDN);
      mpfr_add(A, A, t, MPFR_RNDN);
      mpfr_pow_ui(t, qb, (unsigned long)n, MPFR_RNDN);
      mpfr_mul_q(t, t, const_cast<mpq_class&>(fc.an[n]).get_mpq_t(), MPFR_RNDN);
      mpfr_add(B, B, t, MPFR_RNDN);
    }
    mpq_class pref(1);
    mpz_class nk2, n2k;
    mpz_ui_pow_ui(nk2.get_mpz_t(), (unsigned long)N, (unsigned long)(k / 2));
    mpz_ui_pow_ui(n2k.get_mpz_t(), (unsigned long)(2 * N), (unsigned long)k);
    pref = mpq_class(nk2) / mpq_class(n2k);
    if ((k / 2) % 2) pref = -pref;
    mpfr_mul_q(B, B, pref.get_mpq_t(), MPFR_RNDN);
    return mpfr_sgn((mpfr_srcptr)B) * mpfr_sgn((mpfr_srcptr)A);
  };
  CHECK(s2.sign == oracle_sign(*f2c));
  CHECK(s3.sign == oracle_sign(*f3c));
  CHECK(s2.sign == 1);
  CHECK(s3.sign == -1);

  // determinism
  AtkinLehnerSign s2b = atkin_lehner_sign(f2, 2, eps8);
  CHECK(s2b.sign == s2.sign);
  CHECK(s2b.certified);

  // W_N route against long direct summation at small purely imaginary points
  {
    std::vector<mpz_class> a2(f2c->an.size());
    for (size_t n = 0; n < f2c->an.size(); ++n) a2[n] = f2c->an[n].get_num();
    BallComplex v = evaluate_form(f2, point_q(0, mpq_class(7, 100)), eps8, s2);
    BallComplex oracle = sum_oracle(a2, 0, mpq_class(7, 100), 600, 320, ten_pow(-30));
    CHECK(ball_meets(v, oracle));
    CHECK(v.im().contains_rational(0));
  }
  {
    std::vector<mpz_class> a3(f3c->an.size());
    for (size_t n = 0; n < f3c->an.size(); ++n) a3[n] = f3c->an[n].get_num();
    BallComplex v = evaluate_form(f3, point_q(0, mpq_class(9, 100)), eps8, s3);
    BallComplex oracle = sum_oracle(a3, 0, mpq_class(9, 100), 600, 320, ten_pow(-25));
    CHECK(ball_meets(v, oracle));
  }

  // Gamma_0(N) modularity with the certified signs in play
  std::mt19937_64 rng(5150);
  struct Cfg {
    const EigenformHandle* f;
    const AtkinLehnerSign* s;
  } cfgs[] = {{&f2, &s2}, {&f3, &s3}};
  for (const auto& cfg : cfgs) {
    for (int it = 0; it < 3; ++it) {
      auto [a, b, c, d] = random_gamma(rng, cfg.f->level, 12);
      QC z{mpq_class((long)(rng() % 801) - 400, 1000), mpq_class(900 + (long)(rng() % 500), 1000)};
      auto [gz, den] = apply_moebius(a, b, c, d, z);
      double den_abs = std::sqrt(den.re.get_d() * den.re.get_d() + den.im.get_d() * den.im.get_d());
      long digits = std::max(6L, (long)(6 + (double)cfg.f->weight * std::log10(std::max(1.0, den_abs))));
      BallComplex lhs = evaluate_form(*cfg.f, point_q(gz.re, gz.im, 256),
                                      BallReal::from_mpq(ten_pow(-6), 96), *cfg.s);
      BallComplex fz = evaluate_form(*cfg.f, point_q(z.re, z.im, 256),
                                     BallReal::from_mpq(ten_pow(-digits), 96), *cfg.s);
      BallComplex denb = BallComplex::from_mpq(den.re, den.im, 256);
      BallComplex rhs = mul(pow_si(denb, cfg.f->weight, 256), fz, 256);
      CHECK(ball_meets(lhs, rhs));
    }
  }
}

TEST_CASE("evaluation error guards") {
  CHECK_THROWS_AS(point_q(0, 0), NonPositiveImaginaryPart);
  CHECK_THROWS_AS(point_q(0, -1), NonPositiveImaginaryPart);

  EigenformHandle bad{5, 8, 0, nullptr};
  CHECK_THROWS_AS(evaluate_form(bad, point_q(0, 1), BallReal::from_mpq(ten_pow(-5), 96),
                                kTrivialSign),
                  UnsupportedLevel);
  EigenformHandle f2{2, 8, 0, nullptr};
  CHECK_THROWS_AS(atkin_lehner_sign(f2, 5, BallReal::from_mpq(ten_pow(-5), 96)), UnsupportedLevel);
}
