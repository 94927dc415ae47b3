#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmlab {

enum class Errc {
  InvalidGrid,
  NonZeroMean,
  RangeError,
  DegreeOverflow,
  NotAnalytic,
  GridMismatch,
  ArityZero,
  ArityMismatch,
  DepthMismatch,
  DepthCap,
  NotMartingale,
  NotHardy,
  NotDyadic,
  InvalidConfig,
  ResolutionExceeded,
  UnsupportedFrequency,
  ConfigError,
  IOError,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::NonZeroMean: return "NonZeroMean";
    case Errc::RangeError: return "RangeError";
    case Errc::DegreeOverflow: return "DegreeOverflow";
    case Errc::NotAnalytic: return "NotAnalytic";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::ArityZero: return "ArityZero";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::DepthMismatch: return "DepthMismatch";
    case Errc::DepthCap: return "DepthCap";
    case Errc::NotMartingale: return "NotMartingale";
    case Errc::NotHardy: return "NotHardy";
    case Errc::NotDyadic: return "NotDyadic";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ResolutionExceeded: return "ResolutionExceeded";
    case Errc::UnsupportedFrequency: return "UnsupportedFrequency";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IOError: return "IOError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Carries the smallest grid size that would have fit the requested ladder.
class ResolutionExceeded : public Error {
 public:
  ResolutionExceeded(const std::string& msg, long required_m)
      : Error(Errc::ResolutionExceeded, msg), required_m_(required_m) {}
  long required_m() const noexcept { return required_m_; }

 private:
  long required_m_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> fields)
      : Error(Errc::ConfigError, join(fields)), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  static std::string join(const std::vector<std::string>& f) {
    std::string s;
    for (const auto& x : f) {
      if (!s.empty()) s += "; ";
      s += x;
    }
    return s;
  }
  std::vector<std::string> fields_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace hmlab
