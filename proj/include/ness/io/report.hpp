#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ness/io/config.hpp"
#include "ness/record.hpp"

namespace ness::io {

inline constexpr const char* kFormatVersion = "ness-report/1";

/// Reals rounded to `digits` significant figures; non-finite values become strings.
inline Json round_reals(const Json& j, int digits = 6) {
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::stod(buf);
  }
  if (j.is_array() || j.is_object()) {
    Json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = round_reals(*it, digits);
    return out;
  }
  return j;
}

/// Full-precision copy with non-finite reals as strings (JSON has no inf/nan).
inline Json sanitize(const Json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) return round_reals(j);
  if (j.is_array() || j.is_object()) {
    Json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = sanitize(*it);
    return out;
  }
  return j;
}

/// Digest of the resolved config document.
inline std::string document_digest(const Json& resolved) { return digest(resolved.dump()); }

/// Common envelope of every emitted JSON file.
inline Json envelope(const std::string& command, const ExperimentConfig& cfg) {
  const Json resolved = to_json(cfg);
  Json e;
  e["format"] = kFormatVersion;
  e["command"] = command;
  e["config_digest"] = document_digest(resolved);
  if (cfg.model && cfg.model->confining()) e["model_digest"] = config_digest(cfg.model->build());
  e["seed"] = cfg.run.seed;
  e["config"] = resolved;
  return e;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Report text: reals rounded for reading, or full precision for the raw sidecar.
inline std::string render_json(const Json& report, bool rounded) {
  return (rounded ? round_reals(report) : sanitize(report)).dump(2) + "\n";
}

/// First line of every emitted CSV; readers skip it as a comment.
inline std::string csv_provenance(const std::string& config_digest, std::uint64_t seed) {
  return "# config_digest=" + config_digest + " seed=" + std::to_string(seed) + "\n";
}

/// CSV text of a curve: header then rows, full round-trip precision.
inline std::string curve_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << format_real(columns[c][r]);
    os << '\n';
  }
  return os.str();
}

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::ostringstream os;
  write_csv(os, rec);
  return os.str();
}

}  // namespace ness::io
