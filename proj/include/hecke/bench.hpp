#pragma once

// Benchmark harness: repeated eigenvalue runs with median timings, plus the
// CSV side outputs (timings, truncation lengths, accuracy residuals) that
// back the plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hecke/runner.hpp"

namespace hecke {

struct BenchRow {
  long level = 1;
  long weight = 12;
  long prime = 2;
  Method method = Method::direct;
};

struct BenchResult {
  BenchRow row;
  bool ok = false;
  std::string error;    // filled when !ok
  int reps = 0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  long truncation = 0;        // largest series truncation of the last rep
  bool has_residual = false;  // true when an exact integer value exists
  double residual_log10 = 0.0; // log10 |midpoint - exact|
};

/// Runs each row `reps` times (after one unmeasured warm-up that fills the
/// per-form caches) and reports the median wall time. A failing row is
/// recorded and the run continues.
inline std::vector<BenchResult> run_bench(const std::vector<BenchRow>& rows, long digits,
                                          int reps = 5, long threads = 0,
                                          const std::string& coeffs_path = "") {
  if (reps < 5) reps = 5; // medians below five repetitions are too noisy
  std::vector<BenchResult> out;
  out.reserve(rows.size());
  for (const BenchRow& row : rows) {
    BenchResult r;
    r.row = row;
    r.reps = reps;
    try {
      RunConfig config;
      config.level = row.level;
      config.weight = row.weight;
      config.prime = row.prime;
      config.digits = digits;
      config.method = row.method;
      config.threads = threads;
      if (row.level != 1) config.coeffs_path = coeffs_path;
      run_eigenvalue(config); // warm-up: basis, eigensystem and reduction caches
      std::vector<double> times;
      times.reserve((size_t)reps);
      HeckeEigenvalue last;
      for (int i = 0; i < reps; ++i) {
        last = run_eigenvalue(config);
        times.push_back(last.wall_ms);
      }
      std::sort(times.begin(), times.end());
      size_t n = times.size();
      r.median_ms = (n % 2) ? times[n / 2] : (times[n / 2 - 1] + times[n / 2]) / 2.0;
      r.min_ms = times.front();
      r.max_ms = times.back();
      r.truncation = last.truncation;
      if (last.exact) {
        r.has_residual = true;
        detail::MpfrTmp d(last.value.prec() + 64);
        mpfr_sub_z(d, last.value.mid(), last.exact->get_mpz_t(), MPFR_RNDN);
        mpfr_abs(d, (mpfr_srcptr)d, MPFR_RNDU);
        if (mpfr_zero_p((mpfr_srcptr)d)) {
          // the midpoint is exactly the integer: fall back to the radius
          mpfr_set(d, last.value.rad(), MPFR_RNDU);
        }
        if (mpfr_zero_p((mpfr_srcptr)d)) {
          r.residual_log10 = -999.0;
        } else {
          mpfr_log10(d, (mpfr_srcptr)d, MPFR_RNDN);
          r.residual_log10 = mpfr_get_d((mpfr_srcptr)d, MPFR_RNDN);
        }
      }
      r.ok = true;
    } catch (const Error& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline std::string bench_row_head(const BenchRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%ld,%ld,%ld,%s", row.level, row.weight, row.prime,
                method_label(row.method));
  return buf;
}

} // namespace detail

inline std::string render_bench_table(const std::vector<BenchResult>& results) {
  std::string out = "level weight prime  method      reps median_ms   min_ms     max_ms     status\n";
  char buf[256];
  for (const BenchResult& r : results) {
    if (r.ok)
      std::snprintf(buf, sizeof buf, "%-5ld %-6ld %-6ld %-11s %-4d %-11.3f %-10.3f %-10.3f ok\n",
                    r.row.level, r.row.weight, r.row.prime, method_label(r.row.method), r.reps,
                    r.median_ms, r.min_ms, r.max_ms);
    else
      std::snprintf(buf, sizeof buf, "%-5ld %-6ld %-6ld %-11s %-4d %-11s %-10s %-10s error: %s\n",
                    r.row.level, r.row.weight, r.row.prime, method_label(r.row.method), r.reps,
                    "-", "-", "-", r.error.c_str());
    out += buf;
  }
  return out;
}

inline std::string render_bench_csv(const std::vector<BenchResult>& results) {
  std::string out = "level,weight,prime,method,reps,median_ms,min_ms,max_ms,status\n";
  char buf[256];
  for (const BenchResult& r : results) {
    if (r.ok)
      std::snprintf(buf, sizeof buf, ",%d,%.3f,%.3f,%.3f,ok\n", r.reps, r.median_ms, r.min_ms,
                    r.max_ms);
    else
      std::snprintf(buf, sizeof buf, ",%d,,,,error\n", r.reps);
    out += detail::bench_row_head(r.row) + buf;
  }
  return out;
}

inline std::string render_truncation_csv(const std::vector<BenchResult>& results) {
  std::string out = "level,weight,prime,method,truncation\n";
  for (const BenchResult& r : results)
    if (r.ok) out += detail::bench_row_head(r.row) + "," + std::to_string(r.truncation) + "\n";
  return out;
}

inline std::string render_residual_csv(const std::vector<BenchResult>& results) {
  std::string out = "level,weight,prime,method,log10_residual\n";
  char buf[64];
  for (const BenchResult& r : results)
    if (r.ok && r.has_residual) {
      std::snprintf(buf, sizeof buf, ",%.3f\n", r.residual_log10);
      out += detail::bench_row_head(r.row) + buf;
    }
  return out;
}

} // namespace hecke
