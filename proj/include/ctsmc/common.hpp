#ifndef CTSMC_COMMON_HPP
#define CTSMC_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctsmc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Exit codes shared by the CLI and the error types below.
enum class ExitCode : int { ok = 0, validation = 2, numeric_abort = 3, cap_exceeded = 4 };

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class NumericAbort : public std::runtime_error {
 public:
  explicit NumericAbort(const std::string& what) : std::runtime_error(what) {}
};

class CapExceeded : public std::runtime_error {
 public:
  explicit CapExceeded(const std::string& what) : std::runtime_error(what) {}
};

inline double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v)
    if (x > mx) mx = x;
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double mx = a > b ? a : b;
  return mx + std::log(std::exp(a - mx) + std::exp(b - mx));
}

// (sum w)^2 / sum w^2 from log-weights; in [1, N] when at least one weight is finite.
inline double effective_sample_size(std::span<const double> logw) {
  double l1 = log_sum_exp(logw);
  if (!std::isfinite(l1)) return 0.0;
  std::vector<double> twice(logw.size());
  for (size_t i = 0; i < logw.size(); ++i) twice[i] = 2.0 * logw[i];
  double l2 = log_sum_exp(twice);
  return std::exp(2.0 * l1 - l2);
}

}  // namespace ctsmc

#endif
