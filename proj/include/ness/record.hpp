#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ness/error.hpp"
#include "ness/model.hpp"

namespace ness {

/// Time series of observables (and optionally states) from one seeded run.
/// Reproducible from (config, initial state, integrator spec, seed, stream).
struct TrajectoryRecord {
  std::vector<double> sample_times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<SystemState> states;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string config_hash;

  std::size_t size() const { return sample_times.size(); }

  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }

  const std::vector<double>& series(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw AnalysisError("record has no observable '" + name + "'");
    return columns[static_cast<std::size_t>(it - names.begin())];
  }

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_real(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// One row per sample time: "t,<observable>..."
inline void write_csv(std::ostream& os, const TrajectoryRecord& rec) {
  os << 't';
  for (const auto& n : rec.names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < rec.size(); ++i) {
    os << format_real(rec.sample_times[i]);
    for (const auto& col : rec.columns) os << ',' << format_real(col[i]);
    os << '\n';
  }
}

}  // namespace ness
