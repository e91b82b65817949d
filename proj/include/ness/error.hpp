#pragma once

#include <stdexcept>
#include <string>

namespace ness {

/// Malformed input: bad potentials, inconsistent topologies, schema violations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical fault during time integration.
class IntegratorFault : public std::runtime_error {
 public:
  enum class Kind { non_finite, energy_cap };

  IntegratorFault(Kind kind, double time, std::string state_digest, const std::string& what)
      : std::runtime_error(what), kind_(kind), time_(time), digest_(std::move(state_digest)) {}

  Kind kind() const noexcept { return kind_; }
  double time() const noexcept { return time_; }
  const std::string& state_digest() const noexcept { return digest_; }

 private:
  Kind kind_;
  double time_;
  std::string digest_;
};

/// An estimator could not produce a trustworthy number (too few samples, unconverged).
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ness
