#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fluxobs {

// Port counts are small; capped dynamic sizes keep the hot integration loop
// free of heap allocation.
inline constexpr int kMaxPorts = 8;
inline constexpr int kMaxStacked = 4 * kMaxPorts + 2;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::AutoAlign, kMaxStacked, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::AutoAlign,
                          kMaxPorts, kMaxPorts>;

struct Dims {
  int n_e = 0;  // electrical (magnetic) ports
  int n_m = 0;  // mechanical ports
  int m = 0;    // voltage sources

  void validate() const;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a state leaves the model's physical domain (e.g. the MagLev
/// air gap closes).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& component, double t);
  const std::string& component() const { return component_; }
  double time() const { return time_; }

 private:
  std::string component_;
  double time_;
};

/// The regressor is not persistently exciting over the requested window.
class NotExcitingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GridTooCoarseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::string key = {}, int line = 0);
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

inline void require_size(const Vec& v, int n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline Vec zeros(int n) { return Vec::Zero(n); }

}  // namespace fluxobs
