#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace actc {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Floor applied to probabilities before taking logs, so that zero entries
// stay out of the path sums without producing -inf arithmetic.
constexpr double kProbFloor = 1e-300;

inline double safe_log(double p) { return std::log(p < kProbFloor ? kProbFloor : p); }

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

using Rng = std::mt19937_64;

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

// Log level comes from the ACTC_LOG environment variable (debug|info|warn|error).
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("ACTC_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    std::string s(env);
    if (s == "debug") return LogLevel::kDebug;
    if (s == "warn") return LogLevel::kWarn;
    if (s == "error") return LogLevel::kError;
    return LogLevel::kInfo;
  }();
  return level;
}

template <typename... Args>
void log_msg(LogLevel level, const char* fmt, Args... args) {
  if (level < log_level()) return;
  const char* tag = level == LogLevel::kDebug  ? "DEBUG"
                    : level == LogLevel::kInfo ? "INFO"
                    : level == LogLevel::kWarn ? "WARN"
                                               : "ERROR";
  std::fprintf(stderr, "[%s] ", tag);
  if constexpr (sizeof...(args) == 0) {
    std::fputs(fmt, stderr);
  } else {
    std::fprintf(stderr, fmt, args...);
  }
  std::fputc('\n', stderr);
}

#define ACTC_CHECK(cond, msg)                      \
  do {                                             \
    if (!(cond)) throw std::invalid_argument(msg); \
  } while (0)

}  // namespace actc
