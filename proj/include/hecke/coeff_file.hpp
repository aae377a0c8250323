#pragma once

// Reading and writing eigenform coefficient files: UTF-8 JSON with the fields
//   level            positive integer
//   weight           positive integer
//   coefficients     array of exact integer or rational strings, a_1 first
//   atkin_lehner_sign  optional +1 / -1
// Coefficients are strings so that consumers without big-integer JSON support
// never silently overflow.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hecke/eigenform.hpp"
#include "hecke/errors.hpp"

namespace hecke {

namespace detail {

inline mpq_class parse_exact_rational(const std::string& s) {
  if (s.empty()) throw ParseError("empty coefficient string");
  mpq_class q;
  if (q.set_str(s, 10) != 0) throw ParseError("not an exact integer or rational: '" + s + "'");
  if (q.get_den() == 0) throw ParseError("zero denominator in coefficient '" + s + "'");
  q.canonicalize();
  return q;
}

} // namespace detail

inline FileCoefficients parse_coefficient_file(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("top level must be an object");
  for (const char* field : {"level", "weight", "coefficients"})
    if (!doc.contains(field)) throw ParseError(std::string("missing field '") + field + "'");
  if (!doc["level"].is_number_integer() || !doc["weight"].is_number_integer())
    throw ParseError("'level' and 'weight' must be integers");

  FileCoefficients out;
  out.level = doc["level"].get<long>();
  out.weight = doc["weight"].get<long>();
  if (out.level < 1) throw ParseError("'level' must be positive");
  if (out.weight < 1) throw ParseError("'weight' must be positive");

  const auto& arr = doc["coefficients"];
  if (!arr.is_array() || arr.empty()) throw ParseError("'coefficients' must be a nonempty array");
  out.an.resize(arr.size() + 1);
  out.an[0] = 0;
  for (size_t i = 0; i < arr.size(); ++i) {
    const auto& c = arr[i];
    if (c.is_string())
      out.an[i + 1] = detail::parse_exact_rational(c.get<std::string>());
    else if (c.is_number_integer())
      out.an[i + 1] = mpq_class(c.get<long>());
    else
      throw ParseError("coefficient " + std::to_string(i + 1) + " must be a string");
  }
  if (out.an[1] != 1) throw NotNormalized("a_1 must equal 1 for a normalized eigenform");

  if (doc.contains("atkin_lehner_sign")) {
    const auto& s = doc["atkin_lehner_sign"];
    if (s.is_null()) {
      out.atkin_lehner_sign = 0;
    } else {
      if (!s.is_number_integer()) throw ParseError("'atkin_lehner_sign' must be an integer");
      long v = s.get<long>();
      if (v != 1 && v != -1) throw ParseError("'atkin_lehner_sign' must be +1 or -1");
      out.atkin_lehner_sign = (int)v;
    }
  }
  return out;
}

inline FileCoefficients load_coefficient_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open coefficient file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_coefficient_file(buf.str());
}

inline std::string render_coefficient_file(const FileCoefficients& fc) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"level\": " << fc.level << ",\n";
  out << "  \"weight\": " << fc.weight << ",\n";
  if (fc.atkin_lehner_sign != 0)
    out << "  \"atkin_lehner_sign\": " << fc.atkin_lehner_sign << ",\n";
  out << "  \"coefficients\": [\n";
  for (long n = 1; n <= fc.length(); ++n)
    out << "    \"" << fc.an[(size_t)n].get_str() << (n < fc.length() ? "\",\n" : "\"\n");
  out << "  ]\n}\n";
  return out.str();
}

inline void write_coefficient_file(const FileCoefficients& fc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write coefficient file '" + path + "'");
  out << render_coefficient_file(fc);
  if (!out) throw ParseError("failed writing coefficient file '" + path + "'");
}

} // namespace hecke
