#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "hecke/bench.hpp"
#include "hecke/coeff_file.hpp"
#include "hecke/fetch.hpp"
#include "hecke/runner.hpp"

using namespace hecke;

namespace {

std::string scratch_dir() {
  static std::string dir = [] {
    auto p = std::filesystem::temp_directory_path() /
             ("hecke_cli_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p.string();
  }();
  return dir;
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args, const std::string& env_prefix = "") {
  static std::atomic<int> counter{0};
  std::string errfile = scratch_dir() + "/stderr_" + std::to_string(counter++) + ".txt";
  std::string cmd = env_prefix + "'" + EIGEN_CLI_PATH + "'";
  for (const std::string& a : args) cmd += " '" + a + "'";
  cmd += " 2>" + errfile;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = pclose(pipe);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream ef(errfile);
  std::ostringstream es;
  es << ef.rdbuf();
  return {code, out, es.str()};
}

std::string fixture(const std::string& name) { return std::string(FIXTURES_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

} // namespace

TEST_CASE("eigenvalue run: text output and exit code") {
  CliResult r = run_cli({"--level", "1", "--weight", "12", "--prime", "2", "--digits", "8"});
  CHECK(r.code == 0);
  CHECK(r.out.find("lambda_2") != std::string::npos);
  CHECK(r.out.find("exact        = -24") != std::string::npos);
  CHECK(r.out.find("method       = direct") != std::string::npos);
}

TEST_CASE("structured output carries every field and round-trips") {
  CliResult r = run_cli({"--level", "1", "--weight", "12", "--prime", "2", "--digits", "6",
                         "--format", "structured"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::ordered_json::parse(r.out);
  CHECK(j["p"] == 2);
  CHECK(j["exact"] == "-24");
  CHECK(j["method"] == "direct");
  CHECK(j["z0"] == "0+1i");
  CHECK(j["term_count"] == 3);
  CHECK(j["truncation"].get<long>() >= 1);
  CHECK(j["wall_time_ms"].get<double>() > 0.0);
  CHECK(std::stod(j["radius"].get<std::string>()) < 1e-6);
  CHECK(std::stod(j["midpoint"].get<std::string>()) == Catch::Approx(-24.0));
  // byte-identical re-rendering
  CHECK(j.dump() + "\n" == r.out);
}

TEST_CASE("error exit codes match the error kinds") {
  CHECK(run_cli({"--level", "1", "--weight", "12", "--prime", "4", "--digits", "3"}).code == 22);
  CHECK(run_cli({"--level", "5", "--weight", "4", "--prime", "2", "--digits", "3"}).code == 21);
  CHECK(run_cli({"--level", "1", "--weight", "12", "--prime", "2", "--digits", "0"}).code != 0);
  CHECK(run_cli({"--level", "1", "--weight", "12", "--prime", "2", "--digits", "3", "--z0",
                 "pear"}).code == 23);
  CHECK(run_cli({"--level", "1", "--weight", "12", "--prime", "2", "--digits", "3", "--z0",
                 "1-2i"}).code == 19);
  CliResult h = run_cli({"--level", "1", "--weight", "12", "--prime", "2", "--digits", "3", "--h",
                         "1"});
  CHECK(h.code == 1);
  CHECK(h.err.find("split parameter") != std::string::npos);
  // no --prime and no subcommand: usage error
  CHECK(run_cli({"--level", "1"}).code == 2);
}

TEST_CASE("qexp subcommand prints exact coefficients") {
  CliResult r12 = run_cli({"qexp", "--weight", "12", "--terms", "5"});
  CHECK(r12.code == 0);
  CHECK(r12.out == "1, -24, 252, -1472, 4830\n");

  CliResult r16 = run_cli({"qexp", "--weight", "16", "--terms", "2"});
  CHECK(r16.code == 0);
  CHECK(r16.out == "1, 216\n");

  CliResult r14 = run_cli({"qexp", "--weight", "14", "--terms", "3"});
  CHECK(r14.code == 14);
  CHECK(r14.err.find("no cusp forms") != std::string::npos);
}

TEST_CASE("coefficient file parsing and validation") {
  FileCoefficients fc = parse_coefficient_file(
      R"({"level": 2, "weight": 8, "coefficients": ["1", "-8", "12"]})");
  CHECK(fc.level == 2);
  CHECK(fc.weight == 8);
  CHECK(fc.length() == 3);
  CHECK(fc.an[0] == 0);
  CHECK(fc.an[1] == 1);
  CHECK(fc.an[2] == -8);
  CHECK(fc.atkin_lehner_sign == 0);

  // rationals are allowed
  FileCoefficients fr = parse_coefficient_file(
      R"({"level": 1, "weight": 12, "coefficients": ["1", "3/2"]})");
  CHECK(fr.an[2] == mpq_class(3, 2));

  CHECK_THROWS_AS(parse_coefficient_file(
                      R"({"level": 2, "weight": 8, "coefficients": ["2", "1"]})"),
                  NotNormalized);
  CHECK_THROWS_AS(parse_coefficient_file("{oops"), ParseError);
  CHECK_THROWS_AS(parse_coefficient_file(R"({"level": 2, "weight": 8})"), ParseError);
  CHECK_THROWS_AS(parse_coefficient_file(
                      R"({"level": 2, "weight": 8, "coefficients": []})"),
                  ParseError);
  CHECK_THROWS_AS(parse_coefficient_file(
                      R"({"level": 2, "weight": 8, "coefficients": ["1"], "atkin_lehner_sign": 2})"),
                  ParseError);
  CHECK_THROWS_AS(parse_coefficient_file(
                      R"({"level": 2, "weight": 8, "coefficients": ["1", "1/0"]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_coefficient_file(
                      R"({"level": 0, "weight": 8, "coefficients": ["1"]})"),
                  ParseError);

  // writing and re-reading loses nothing
  FileCoefficients orig = load_coefficient_file(fixture("newform_2_8_a.json"));
  CHECK(orig.level == 2);
  CHECK(orig.weight == 8);
  CHECK(orig.length() == 200);
  CHECK(orig.atkin_lehner_sign == 1);
  FileCoefficients back = parse_coefficient_file(render_coefficient_file(orig));
  CHECK(back.level == orig.level);
  CHECK(back.weight == orig.weight);
  CHECK(back.atkin_lehner_sign == orig.atkin_lehner_sign);
  REQUIRE(back.an.size() == orig.an.size());
  for (size_t i = 0; i < orig.an.size(); ++i) CHECK(back.an[i] == orig.an[i]);
}

TEST_CASE("file-backed runs reproduce the fixture coefficients") {
  // level 2 weight 8: a_3 = 12, and p = 2 divides the level (2 evaluations)
  CliResult r3 = run_cli({"--level", "2", "--weight", "8", "--prime", "3", "--digits", "8",
                          "--coeffs", fixture("newform_2_8_a.json"), "--format", "structured"});
  REQUIRE(r3.code == 0);
  auto j3 = nlohmann::ordered_json::parse(r3.out);
  CHECK(j3["exact"] == "12");

  CliResult r2 = run_cli({"--level", "2", "--weight", "8", "--prime", "2", "--digits", "8",
                          "--coeffs", fixture("newform_2_8_a.json"), "--format", "structured"});
  REQUIRE(r2.code == 0);
  auto j2 = nlohmann::ordered_json::parse(r2.out);
  CHECK(j2["exact"] == "-8");
  CHECK(j2["term_count"] == 2);

  // level 3 weight 6: a_5 = 6, a_3 = 9 (3 divides the level)
  CliResult r5 = run_cli({"--level", "3", "--weight", "6", "--prime", "5", "--digits", "8",
                          "--coeffs", fixture("newform_3_6_a.json"), "--format", "structured"});
  REQUIRE(r5.code == 0);
  CHECK(nlohmann::ordered_json::parse(r5.out)["exact"] == "6");

  CliResult r33 = run_cli({"--level", "3", "--weight", "6", "--prime", "3", "--digits", "8",
                           "--coeffs", fixture("newform_3_6_a.json"), "--format", "structured"});
  REQUIRE(r33.code == 0);
  auto j33 = nlohmann::ordered_json::parse(r33.out);
  CHECK(j33["exact"] == "9");
  CHECK(j33["term_count"] == 2);

  // level/weight flags must match the file
  CHECK(run_cli({"--level", "3", "--weight", "6", "--prime", "5", "--digits", "6", "--coeffs",
                 fixture("newform_2_8_a.json")}).code == 23);

  // a file with too few coefficients cannot reach high accuracy
  FileCoefficients shorty = load_coefficient_file(fixture("newform_2_8_a.json"));
  shorty.an.resize(11); // a_1..a_10
  std::string short_path = scratch_dir() + "/short.json";
  spit(short_path, render_coefficient_file(shorty));
  CHECK(run_cli({"--level", "2", "--weight", "8", "--prime", "3", "--digits", "10", "--coeffs",
                 short_path}).code == 15);

  // malformed and unnormalized files map to their exit codes
  std::string bad_path = scratch_dir() + "/bad.json";
  spit(bad_path, "{not json");
  CHECK(run_cli({"--level", "2", "--weight", "8", "--prime", "3", "--digits", "6", "--coeffs",
                 bad_path}).code == 23);
  std::string unnorm_path = scratch_dir() + "/unnorm.json";
  spit(unnorm_path, R"({"level": 2, "weight": 8, "coefficients": ["2", "1", "3"]})");
  CHECK(run_cli({"--level", "2", "--weight", "8", "--prime", "3", "--digits", "6", "--coeffs",
                 unnorm_path}).code == 24);
}

TEST_CASE("a base point at a zero of the form is refused with advice") {
  // weight 16 vanishes at the corner rho = -1/2 + sqrt(3)/2 i; this rational
  // point lies within ~1e-34 of it
  CliResult r = run_cli({"--level", "1", "--weight", "16", "--prime", "2", "--digits", "6",
                         "--z0", "-1/2+0.8660254037844386467637231707529361i"});
  CHECK(r.code == 13);
  CHECK(r.err.find("too close to a zero") != std::string::npos);
  CHECK(r.err.find("--z0") != std::string::npos);
}

TEST_CASE("threads flag changes nothing but the wall time") {
  CliResult one = run_cli({"--level", "1", "--weight", "12", "--prime", "11", "--digits", "8",
                           "--threads", "1", "--format", "structured"});
  CliResult two = run_cli({"--level", "1", "--weight", "12", "--prime", "11", "--digits", "8",
                           "--threads", "2", "--format", "structured"});
  REQUIRE(one.code == 0);
  REQUIRE(two.code == 0);
  auto j1 = nlohmann::ordered_json::parse(one.out);
  auto j2 = nlohmann::ordered_json::parse(two.out);
  CHECK(j1["exact"] == "534612");
  CHECK(j1["exact"] == j2["exact"]);
  CHECK(j1["term_count"] == j2["term_count"]);
}

TEST_CASE("bench subcommand: tables, CSVs, per-row failures") {
  std::string csv = scratch_dir() + "/bench.csv";
  std::string tcsv = scratch_dir() + "/trunc.csv";
  std::string rcsv = scratch_dir() + "/resid.csv";
  CliResult r = run_cli({"bench", "--row", "1,12,11,direct", "--row", "1,12,4,direct", "--reps",
                         "5", "--digits", "8", "--csv", csv, "--truncation-csv", tcsv,
                         "--residual-csv", rcsv});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("median_ms") != std::string::npos);
  CHECK(r.out.find("error: CompositeIndex") != std::string::npos);

  std::string csv_text = slurp(csv);
  CHECK(csv_text.find("level,weight,prime,method,reps,median_ms,min_ms,max_ms,status") == 0);
  CHECK(csv_text.find("1,12,11,direct,5,") != std::string::npos);
  CHECK(csv_text.find(",ok\n") != std::string::npos);
  CHECK(csv_text.find("1,12,4,direct,5,,,,error") != std::string::npos);

  std::string t_text = slurp(tcsv);
  CHECK(t_text.find("level,weight,prime,method,truncation") == 0);
  CHECK(t_text.find("1,12,11,direct,") != std::string::npos);

  std::string r_text = slurp(rcsv);
  CHECK(r_text.find("level,weight,prime,method,log10_residual") == 0);
  CHECK(r_text.find("1,12,11,direct,-") != std::string::npos);

  // an empty specification produces an empty table
  CliResult empty = run_cli({"bench"});
  CHECK(empty.code == 0);
  CHECK(empty.out ==
        "level weight prime  method      reps median_ms   min_ms     max_ms     status\n");

  // malformed row
  CHECK(run_cli({"bench", "--row", "1,12"}).code == 23);
  // reps below five are rejected by the option check
  CHECK(run_cli({"bench", "--row", "1,12,2,direct", "--reps", "2"}).code != 0);
}

TEST_CASE("fetch: server, cache, and failure modes") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string body_a = render_coefficient_file(load_coefficient_file(fixture("newform_2_8_a.json")));
  std::string body_wrong = render_coefficient_file(load_coefficient_file(fixture("newform_3_6_a.json")));
  server.Get("/newform/2/8/a", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(body_a, "application/json");
  });
  server.Get("/newform/2/8/mismatch", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(body_wrong, "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&] { server.listen_after_bind(); });
  for (int i = 0; i < 200 && !server.is_running(); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  REQUIRE(server.is_running());
  std::string endpoint = "http://127.0.0.1:" + std::to_string(port);
  std::string cache = scratch_dir() + "/cache";

  CliResult first = run_cli({"fetch", "--level", "2", "--weight", "8", "--label", "a",
                             "--endpoint", endpoint, "--cache-dir", cache});
  CHECK(first.code == 0);
  CHECK(first.out.find("(written)") != std::string::npos);
  CHECK(hits == 1);
  std::string cache_file = cache + "/newform_2_8_a.json";
  REQUIRE(std::filesystem::exists(cache_file));
  CHECK(slurp(cache_file) == body_a);

  // second run is served by the cache: no additional request, same summary
  CliResult second = run_cli({"fetch", "--level", "2", "--weight", "8", "--label", "a",
                              "--endpoint", endpoint, "--cache-dir", cache});
  CHECK(second.code == 0);
  CHECK(second.out.find("(hit)") != std::string::npos);
  CHECK(hits == 1);
  CHECK(slurp(cache_file) == body_a);

  // the cached coefficients drive a full eigenvalue run
  CliResult ev = run_cli({"--level", "2", "--weight", "8", "--prime", "5", "--digits", "8",
                          "--coeffs", cache_file, "--format", "structured"});
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::ordered_json::parse(ev.out)["exact"] == "-210");

  // unknown label and level/weight mismatch
  CHECK(run_cli({"fetch", "--level", "2", "--weight", "8", "--label", "nope", "--endpoint",
                 endpoint, "--cache-dir", cache}).code == 26);
  CliResult mm = run_cli({"fetch", "--level", "2", "--weight", "8", "--label", "mismatch",
                          "--endpoint", endpoint, "--cache-dir", cache});
  CHECK(mm.code == 23);
  CHECK_FALSE(std::filesystem::exists(cache + "/newform_2_8_mismatch.json"));

  // environment variable selects the cache directory when no flag is given
  std::string env_cache = scratch_dir() + "/envcache";
  CliResult env_run = run_cli({"fetch", "--level", "2", "--weight", "8", "--label", "a",
                               "--endpoint", endpoint},
                              "HECKE_CACHE_DIR='" + env_cache + "' ");
  CHECK(env_run.code == 0);
  CHECK(std::filesystem::exists(env_cache + "/newform_2_8_a.json"));

  server.stop();
  listener.join();

  // offline: cache hits still work, cache misses report a network error
  CliResult offline_hit = run_cli({"fetch", "--level", "2", "--weight", "8", "--label", "a",
                                   "--endpoint", endpoint, "--cache-dir", cache});
  CHECK(offline_hit.code == 0);
  CHECK(offline_hit.out == second.out);
  CHECK(run_cli({"fetch", "--level", "3", "--weight", "6", "--label", "a", "--endpoint", endpoint,
                 "--cache-dir", cache}).code == 25);
}

TEST_CASE("runner pieces: handles, rendering, bench API") {
  RunConfig config;
  config.level = 2;
  config.weight = 8;
  config.prime = 7;
  config.digits = 8;
  config.coeffs_path = fixture("newform_2_8_a.json");
  HeckeEigenvalue ev = run_eigenvalue(config);
  REQUIRE(ev.exact.has_value());
  CHECK(*ev.exact == 1016);

  std::string structured = render_structured(ev, config.digits);
  CHECK(nlohmann::ordered_json::parse(structured).dump() + "\n" == structured);
  std::string text = render_text(ev, config.digits);
  CHECK(text.find("exact        = 1016") != std::string::npos);

  // level > 1 without a file is refused up front
  RunConfig bare;
  bare.level = 7;
  bare.weight = 4;
  bare.prime = 2;
  CHECK_THROWS_AS(run_eigenvalue(bare), UnsupportedLevel);

  // in-process bench: empty input, then one real row
  CHECK(run_bench({}, 6).empty());
  std::vector<BenchRow> rows{{1, 12, 3, Method::direct}};
  auto res = run_bench(rows, 6, 5);
  REQUIRE(res.size() == 1);
  CHECK(res[0].ok);
  CHECK(res[0].reps == 5);
  CHECK(res[0].median_ms > 0.0);
  CHECK(res[0].min_ms <= res[0].median_ms);
  CHECK(res[0].median_ms <= res[0].max_ms);
  CHECK(res[0].truncation >= 1);
  CHECK(res[0].has_residual);
  CHECK(res[0].residual_log10 < -6.0);
}
