// eigen: guaranteed-accuracy Hecke eigenvalues of classical eigenforms.
//
//   eigen --level N --weight K --prime P --digits D [options]   compute lambda_P
//   eigen qexp  --weight K --terms M                            q-expansion
//   eigen bench --row L,K,P,METHOD [...]                        timings + CSVs
//   eigen fetch --level N --weight K --label L --endpoint URL   remote coefficients

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hecke/bench.hpp"
#include "hecke/fetch.hpp"
#include "hecke/runner.hpp"

namespace {

mpq_class rational_from_literal(const std::string& raw) {
  std::string s;
  for (char c : raw)
    if (!std::isspace((unsigned char)c)) s += c;
  if (!s.empty() && s[0] == '+') s = s.substr(1);
  if (s.empty()) throw hecke::ParseError("empty number literal");
  try {
    if (s.find('/') != std::string::npos) {
      mpq_class q;
      if (q.set_str(s, 10) != 0) throw hecke::ParseError("bad rational literal '" + raw + "'");
      if (q.get_den() == 0) throw hecke::ParseError("zero denominator in '" + raw + "'");
      q.canonicalize();
      return q;
    }
    size_t dot = s.find('.');
    // explicit base 10: the default base 0 would read a leading zero as octal
    if (dot == std::string::npos) return mpq_class(mpz_class(s, 10));
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    if (digits.empty() || digits == "-") throw hecke::ParseError("bad literal '" + raw + "'");
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, (unsigned long)(s.size() - dot - 1));
    mpq_class q(mpz_class(digits, 10), den);
    q.canonicalize();
    return q;
  } catch (const std::invalid_argument&) {
    throw hecke::ParseError("bad number literal '" + raw + "'");
  }
}

// "RE+IMi" with RE, IM decimal or rational; "IMi" and bare "i" also accepted
std::pair<mpq_class, mpq_class> parse_z0_literal(const std::string& raw) {
  std::string s;
  for (char c : raw)
    if (!std::isspace((unsigned char)c)) s += c;
  if (s.empty() || (s.back() != 'i' && s.back() != 'I'))
    throw hecke::ParseError("--z0 must look like RE+IMi, e.g. 0.3+1.1i");
  s.pop_back();
  if (s.empty()) return {mpq_class(0), mpq_class(1)};
  size_t split = std::string::npos;
  for (size_t j = s.size(); j-- > 1;)
    if (s[j] == '+' || s[j] == '-') {
      split = j;
      break;
    }
  std::string re_str = "0", im_str = s;
  if (split != std::string::npos) {
    re_str = s.substr(0, split);
    im_str = s.substr(split);
  }
  if (im_str.empty() || im_str == "+" ) im_str = "1";
  if (im_str == "-") im_str = "-1";
  return {rational_from_literal(re_str), rational_from_literal(im_str)};
}

hecke::Method method_from_name(const std::string& name) {
  if (name == "direct") return hecke::Method::direct;
  if (name == "eisenstein") return hecke::Method::eisenstein;
  throw hecke::ParseError("unknown method '" + name + "'");
}

hecke::BenchRow bench_row_from_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : spec) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 4)
    throw hecke::ParseError("--row needs LEVEL,WEIGHT,PRIME,METHOD, got '" + spec + "'");
  hecke::BenchRow row;
  try {
    row.level = std::stol(parts[0]);
    row.weight = std::stol(parts[1]);
    row.prime = std::stol(parts[2]);
  } catch (const std::exception&) {
    throw hecke::ParseError("bad --row numbers in '" + spec + "'");
  }
  row.method = method_from_name(parts[3]);
  return row;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw hecke::Error("cannot write '" + path + "'", 1);
  out << content;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (size_t j = 0; j < items.size(); ++j) {
    if (j) out += sep;
    out += items[j];
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"guaranteed-accuracy Hecke eigenvalues of classical modular eigenforms"};
  app.set_help_flag("--help", "print help and exit"); // frees -h/--h for the split parameter
  app.require_subcommand(0, 1);

  long level = 1, weight = 12, prime = 0, digits = 10, embedding = 0, threads = 0;
  std::string method = "direct", z0_str, h_str, coeffs_path, format = "text";
  app.add_option("--level", level, "level N of the form (N > 1 needs --coeffs)")
      ->capture_default_str();
  app.add_option("--weight", weight, "weight k of the form")->capture_default_str();
  app.add_option("--prime", prime, "prime index p of the Hecke operator T_p");
  app.add_option("--digits", digits, "decimal accuracy target (radius < 10^-digits)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--method", method, "evaluation route")
      ->capture_default_str()
      ->check(CLI::IsMember({"direct", "eisenstein"}));
  app.add_option("--z0", z0_str, "base point RE+IMi (exact decimal/rational parts)");
  app.add_option("--h", h_str, "numerator/denominator budget split in (0,1)");
  app.add_option("--embedding", embedding, "real-root index for dim > 1 spaces")
      ->capture_default_str();
  app.add_option("--coeffs", coeffs_path, "coefficient file for levels above 1");
  app.add_option("--format", format, "output format")
      ->capture_default_str()
      ->check(CLI::IsMember({"text", "structured"}));
  app.add_option("--threads", threads, "worker threads (0 = number of cores)")
      ->capture_default_str();

  auto* qexp_cmd = app.add_subcommand("qexp", "print q-expansion coefficients a_1..a_terms");
  long q_level = 1, q_weight = 12, q_terms = 10, q_embedding = 0;
  qexp_cmd->add_option("--level", q_level, "level (must be 1)")->capture_default_str();
  qexp_cmd->add_option("--weight", q_weight, "weight")->capture_default_str();
  qexp_cmd->add_option("--terms", q_terms, "number of coefficients")->capture_default_str();
  qexp_cmd->add_option("--embedding", q_embedding, "embedding for dim > 1")->capture_default_str();

  auto* bench_cmd = app.add_subcommand("bench", "median timings over repeated runs");
  std::vector<std::string> row_specs;
  long b_digits = 10, b_threads = 0;
  int b_reps = 5;
  std::string b_csv, b_trunc_csv, b_resid_csv, b_coeffs;
  bench_cmd->add_option("--row", row_specs, "benchmark row LEVEL,WEIGHT,PRIME,METHOD (repeatable)");
  bench_cmd->add_option("--digits", b_digits, "accuracy target per run")->capture_default_str();
  bench_cmd->add_option("--reps", b_reps, "repetitions per row (at least 5)")
      ->capture_default_str()
      ->check(CLI::Range(5, 10000));
  bench_cmd->add_option("--csv", b_csv, "write the timing table as CSV to this path");
  bench_cmd->add_option("--truncation-csv", b_trunc_csv, "write truncation lengths CSV");
  bench_cmd->add_option("--residual-csv", b_resid_csv, "write log10 residual CSV");
  bench_cmd->add_option("--coeffs", b_coeffs, "coefficient file for rows with level > 1");
  bench_cmd->add_option("--threads", b_threads, "worker threads per run")->capture_default_str();

  auto* fetch_cmd = app.add_subcommand("fetch", "fetch newform coefficients into the cache");
  long f_level = 0, f_weight = 0;
  std::string f_label, f_endpoint, f_cache;
  fetch_cmd->add_option("--level", f_level, "newform level")->required();
  fetch_cmd->add_option("--weight", f_weight, "newform weight")->required();
  fetch_cmd->add_option("--label", f_label, "newform label, e.g. a")->required();
  fetch_cmd->add_option("--endpoint", f_endpoint, "REST endpoint base URL");
  fetch_cmd->add_option("--cache-dir", f_cache,
                        "cache directory (default: $HECKE_CACHE_DIR or ~/.cache/hecke)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (qexp_cmd->parsed()) {
      std::cout << join(hecke::run_qexp(q_level, q_weight, q_terms, q_embedding), ", ") << "\n";
      return 0;
    }

    if (bench_cmd->parsed()) {
      std::vector<hecke::BenchRow> rows;
      for (const std::string& spec : row_specs) rows.push_back(bench_row_from_spec(spec));
      auto results = hecke::run_bench(rows, b_digits, b_reps, b_threads, b_coeffs);
      std::cout << hecke::render_bench_table(results);
      if (!b_csv.empty()) write_text_file(b_csv, hecke::render_bench_csv(results));
      if (!b_trunc_csv.empty())
        write_text_file(b_trunc_csv, hecke::render_truncation_csv(results));
      if (!b_resid_csv.empty())
        write_text_file(b_resid_csv, hecke::render_residual_csv(results));
      return 0;
    }

    if (fetch_cmd->parsed()) {
      bool from_cache = false;
      hecke::FileCoefficients fc = hecke::fetch_remote_coefficients(
          f_level, f_weight, f_label, f_endpoint, f_cache, &from_cache);
      std::string dir = f_cache.empty() ? hecke::default_cache_dir() : f_cache;
      std::cout << "newform " << fc.level << "." << fc.weight << "." << f_label << ": "
                << fc.length() << " coefficients"
                << (fc.atkin_lehner_sign ? (fc.atkin_lehner_sign > 0 ? ", W = +1" : ", W = -1")
                                         : "")
                << "\n";
      std::cout << "cache: " << hecke::cache_path_for(f_level, f_weight, f_label, dir)
                << (from_cache ? " (hit)" : " (written)") << "\n";
      return 0;
    }

    if (prime == 0) {
      std::cerr << "error: --prime is required (or use a subcommand)\n" << app.help();
      return 2;
    }
    hecke::RunConfig config;
    config.level = level;
    config.weight = weight;
    config.prime = prime;
    config.digits = digits;
    config.method = method_from_name(method);
    if (!z0_str.empty()) config.z0 = parse_z0_literal(z0_str);
    if (!h_str.empty()) config.h = rational_from_literal(h_str);
    config.embedding = embedding;
    config.coeffs_path = coeffs_path;
    config.format = format == "structured" ? hecke::RunConfig::Format::structured
                                           : hecke::RunConfig::Format::text;
    config.threads = threads;
    hecke::HeckeEigenvalue ev = hecke::run_eigenvalue(config);
    std::cout << (config.format == hecke::RunConfig::Format::structured
                      ? hecke::render_structured(ev, digits)
                      : hecke::render_text(ev, digits));
    return 0;
  } catch (const hecke::Error& e) {
    std::cerr << "error: " << hecke::error_message(e) << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
