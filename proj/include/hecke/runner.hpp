#pragma once

// Shared plumbing between the command-line tool and the tests: turning a
// parsed configuration into library calls and rendering the results.

#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hecke/coeff_file.hpp"
#include "hecke/hecke_op.hpp"

namespace hecke {

struct RunConfig {
  long level = 1;
  long weight = 12;
  long prime = 0;
  long digits = 10; // target accuracy 10^{-digits}
  Method method = Method::direct;
  std::optional<std::pair<mpq_class, mpq_class>> z0;
  std::optional<mpq_class> h;
  long embedding = 0;
  std::string coeffs_path;
  enum class Format { text, structured } format = Format::text;
  long threads = 0; // 0 = hardware concurrency
};

namespace detail {

inline mpq_class pow10_q(long e) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, (unsigned long)(e < 0 ? -e : e));
  return e < 0 ? mpq_class(1, p) : mpq_class(p);
}

inline std::string format_mpfr(mpfr_srcptr v, int sig_digits) {
  if (mpfr_zero_p(v)) return "0";
  char* s = nullptr;
  mpfr_asprintf(&s, "%.*Re", sig_digits - 1, v);
  std::string out = s ? s : "";
  mpfr_free_str(s);
  return out;
}

inline std::string format_point(const EvalPoint& z) {
  if (z.exact) return z.exact->first.get_str() + "+" + z.exact->second.get_str() + "i";
  MpfrTmp re(64), im(64);
  mpfr_set(re, z.z.re().mid(), MPFR_RNDN);
  mpfr_set(im, z.z.im().mid(), MPFR_RNDN);
  return format_mpfr(re, 17) + "+" + format_mpfr(im, 17) + "i";
}

} // namespace detail

inline long resolved_threads(long requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? (long)hw : 1;
}

/// Builds the eigenform handle a config refers to, loading and validating the
/// coefficient file when one is given.
inline EigenformHandle make_handle(const RunConfig& config) {
  if (!config.coeffs_path.empty()) {
    auto fc = std::make_shared<FileCoefficients>(load_coefficient_file(config.coeffs_path));
    if (fc->level != config.level || fc->weight != config.weight)
      throw ParseError("'" + config.coeffs_path + "' is level " + std::to_string(fc->level) +
                       " weight " + std::to_string(fc->weight) + ", requested level " +
                       std::to_string(config.level) + " weight " + std::to_string(config.weight));
    long lvl = fc->level, k = fc->weight;
    return EigenformHandle{lvl, k, config.embedding, std::move(fc)};
  }
  if (config.level != 1)
    throw UnsupportedLevel("level " + std::to_string(config.level) +
                           " needs coefficients; pass --coeffs or use fetch");
  return EigenformHandle{1, config.weight, config.embedding, nullptr};
}

inline HeckeEigenvalue run_eigenvalue(const RunConfig& config) {
  if (config.digits < 1) throw NonPositiveAccuracy("--digits must be at least 1");
  EigenformHandle f = make_handle(config);
  BallReal eps = BallReal::from_mpq(detail::pow10_q(-config.digits), 192);
  std::optional<EvalPoint> z0;
  if (config.z0) z0 = make_eval_point(config.z0->first, config.z0->second, 192);
  HeckeEigenvalue ev = eigenvalue_numerical(f, config.prime, eps, z0, config.h, config.method,
                                            resolved_threads(config.threads));
  detail::MpfrTmp lo(96);
  eps.get_lower(lo);
  if (!(ev.value.is_finite() && mpfr_cmp(ev.value.rad(), (mpfr_srcptr)lo) < 0))
    throw PrecisionExhausted("final radius misses the accuracy target"); // defensive; not expected
  return ev;
}

inline std::string render_text(const HeckeEigenvalue& ev, long digits) {
  std::string out;
  out += "lambda_" + std::to_string(ev.p) + " = " + ev.value.to_string((int)digits + 2) + "\n";
  out += "midpoint     = " + detail::format_mpfr(ev.value.mid(), (int)digits + 5) + "\n";
  out += "radius       = " + detail::format_mpfr(ev.value.rad(), 3) + "\n";
  if (ev.exact) out += "exact        = " + ev.exact->get_str() + "\n";
  out += "method       = " + std::string(method_label(ev.method)) + "\n";
  out += "z0           = " + detail::format_point(ev.z0) + "\n";
  out += "truncation   = " + std::to_string(ev.truncation) + "\n";
  out += "term_count   = " + std::to_string(ev.term_count) + "\n";
  out += "wall_time_ms = " + std::to_string(ev.wall_ms) + "\n";
  return out;
}

inline std::string render_structured(const HeckeEigenvalue& ev, long digits) {
  nlohmann::ordered_json j;
  j["p"] = ev.p;
  j["midpoint"] = detail::format_mpfr(ev.value.mid(), (int)digits + 5);
  j["radius"] = detail::format_mpfr(ev.value.rad(), 3);
  if (ev.exact)
    j["exact"] = ev.exact->get_str();
  else
    j["exact"] = nullptr;
  j["method"] = method_label(ev.method);
  j["z0"] = detail::format_point(ev.z0);
  j["truncation"] = ev.truncation;
  j["term_count"] = ev.term_count;
  j["wall_time_ms"] = ev.wall_ms;
  return j.dump() + "\n";
}

/// a_1..a_terms of the level-1 eigenform: exact integers for one-dimensional
/// spaces, ball strings otherwise.
inline std::vector<std::string> run_qexp(long level, long weight, long terms, long embedding) {
  if (level != 1) throw UnsupportedLevel("the q-expansion engine covers level 1 only");
  if (terms < 1) throw Error("need at least one term", 1);
  long dim = cusp_dim(weight);
  if (dim == 0) throw EmptySpace("no cusp forms in weight " + std::to_string(weight));
  std::vector<std::string> out;
  out.reserve((size_t)terms);
  if (dim == 1) {
    CuspBasis basis = cusp_basis(weight, terms);
    for (long n = 1; n <= terms; ++n) out.push_back(basis.elements[0][(size_t)n].get_str());
    return out;
  }
  EigenformHandle f{1, weight, embedding, nullptr};
  std::vector<BallReal> coeffs = eigenform_coeffs(f, terms, 192);
  for (long n = 1; n <= terms; ++n) out.push_back(coeffs[(size_t)n].to_string());
  return out;
}

/// The user-facing message for an error, with the advice the numeric codes
/// cannot convey.
inline std::string error_message(const Error& e) {
  if (dynamic_cast<const ProbablyZero*>(&e))
    return "evaluation point too close to a zero of f; choose another --z0";
  return e.what();
}

} // namespace hecke
