#pragma once

// Remote coefficient retrieval with a local file cache. The endpoint serves
// CoefficientFile JSON under GET /newform/<level>/<weight>/<label>; once a
// form has been fetched, later runs read the cache file and never touch the
// network, so results cannot change between online and offline runs.

#include <cstdlib>
#include <filesystem>
#include <string>

#include <httplib.h>

#include "hecke/coeff_file.hpp"

namespace hecke {

inline std::string default_cache_dir() {
  if (const char* env = std::getenv("HECKE_CACHE_DIR"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::string(home) + "/.cache/hecke";
  return ".hecke-cache";
}

inline std::string cache_path_for(long level, long weight, const std::string& label,
                                  const std::string& cache_dir) {
  return cache_dir + "/newform_" + std::to_string(level) + "_" + std::to_string(weight) + "_" +
         label + ".json";
}

namespace detail {

inline void validate_label(const std::string& label) {
  if (label.empty()) throw ParseError("newform label must not be empty");
  for (char c : label)
    if (!std::isalnum((unsigned char)c) && c != '.' && c != '_' && c != '-')
      throw ParseError("newform label contains unsupported characters: '" + label + "'");
}

inline void validate_match(const FileCoefficients& fc, long level, long weight,
                           const std::string& where) {
  if (fc.level != level || fc.weight != weight)
    throw ParseError(where + " is level " + std::to_string(fc.level) + " weight " +
                     std::to_string(fc.weight) + ", requested level " + std::to_string(level) +
                     " weight " + std::to_string(weight));
}

} // namespace detail

/// Returns the coefficients for the requested newform, via the cache when
/// possible. `fetched_from_cache`, when given, reports which path was taken.
inline FileCoefficients fetch_remote_coefficients(long level, long weight,
                                                  const std::string& label,
                                                  const std::string& endpoint_url,
                                                  const std::string& cache_dir,
                                                  bool* fetched_from_cache = nullptr) {
  detail::validate_label(label);
  std::string dir = cache_dir.empty() ? default_cache_dir() : cache_dir;
  std::string path = cache_path_for(level, weight, label, dir);

  if (std::filesystem::exists(path)) {
    FileCoefficients fc = load_coefficient_file(path);
    detail::validate_match(fc, level, weight, "cached file '" + path + "'");
    if (fetched_from_cache) *fetched_from_cache = true;
    return fc;
  }

  if (endpoint_url.empty()) throw NetworkError("no cache entry and no endpoint URL configured");
  httplib::Client client(endpoint_url);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(15, 0);
  std::string route =
      "/newform/" + std::to_string(level) + "/" + std::to_string(weight) + "/" + label;
  httplib::Result res = client.Get(route);
  if (!res)
    throw NetworkError("cannot reach " + endpoint_url + ": " + httplib::to_string(res.error()));
  if (res->status == 404)
    throw NotFound("no newform " + std::to_string(level) + "." + std::to_string(weight) + "." +
                   label + " at " + endpoint_url);
  if (res->status != 200)
    throw NetworkError("HTTP status " + std::to_string(res->status) + " from " + endpoint_url);

  FileCoefficients fc = parse_coefficient_file(res->body);
  detail::validate_match(fc, level, weight, "response from " + endpoint_url);

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create cache directory '" + dir + "': " + ec.message());
  write_coefficient_file(fc, path);
  if (fetched_from_cache) *fetched_from_cache = false;
  return fc;
}

} // namespace hecke
