#pragma once

// Result rows shared by every checker.  An asserted row passes when its
// slack is >= -tolerance; reported rows never fail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace hmlab {

struct SlackReport {
  double lhs = 0;
  double rhs = 0;
  double slack = 0;  // rhs - lhs
  double se = 0;     // Monte-Carlo standard error attached to lhs (0 if exact)
  bool violated = false;
};

enum class RowKind { Asserted, Reported };

// num/den with 0/0 read as 0.
inline double safe_ratio(double num, double den, double floor = 1e-300) {
  if (std::abs(num) <= floor && std::abs(den) <= floor) return 0.0;
  if (std::abs(den) <= floor) return std::numeric_limits<double>::infinity();
  return num / den;
}

struct Row {
  std::string suite;
  std::string check;
  RowKind kind = RowKind::Reported;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string form;  // what the value is compared against, in words
  double tolerance = 0;
  double slack = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
  std::uint64_t seed = 0;
  std::string detail;
};

struct ConstantsReport {
  std::vector<Row> rows;

  Row& assert_row(std::string suite, std::string check, double value, std::string form, double slack,
                  double tolerance, std::uint64_t seed = 0, std::string detail = {}) {
    Row r{std::move(suite), std::move(check), RowKind::Asserted, value, std::move(form), tolerance, slack,
          std::isfinite(slack) && slack >= -tolerance, seed, std::move(detail)};
    rows.push_back(std::move(r));
    return rows.back();
  }

  Row& report_row(std::string suite, std::string check, double value, std::string form = {},
                  std::uint64_t seed = 0, std::string detail = {}) {
    Row r{std::move(suite), std::move(check), RowKind::Reported, value, std::move(form), 0.0,
          std::numeric_limits<double>::quiet_NaN(), true, seed, std::move(detail)};
    rows.push_back(std::move(r));
    return rows.back();
  }

  void append(const ConstantsReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }

  bool all_pass() const {
    for (const auto& r : rows)
      if (r.kind == RowKind::Asserted && !r.pass) return false;
    return true;
  }

  const Row* find(const std::string& check) const {
    for (const auto& r : rows)
      if (r.check == check) return &r;
    return nullptr;
  }

  std::vector<const Row*> failures() const {
    std::vector<const Row*> out;
    for (const auto& r : rows)
      if (r.kind == RowKind::Asserted && !r.pass) out.push_back(&r);
    return out;
  }
};

inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0) x = 0.0;  // no "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline const char* kCsvHeader = "suite,check,kind,value,form,tolerance,slack,status,seed,detail";

inline void write_csv(std::ostream& os, const ConstantsReport& rep) {
  os << kCsvHeader << "\n";
  for (const auto& r : rep.rows) {
    os << csv_escape(r.suite) << ',' << csv_escape(r.check) << ','
       << (r.kind == RowKind::Asserted ? "asserted" : "reported") << ',' << fmt_num(r.value) << ','
       << csv_escape(r.form) << ',' << fmt_num(r.tolerance) << ',' << fmt_num(r.slack) << ','
       << (r.kind == RowKind::Reported ? "report" : (r.pass ? "pass" : "fail")) << ',' << r.seed << ','
       << csv_escape(r.detail) << "\n";
  }
}

inline nlohmann::json json_num(double x) {
  if (std::isfinite(x)) return x;
  return fmt_num(x);
}

inline nlohmann::json to_json(const Row& r) {
  return {{"suite", r.suite},
          {"check", r.check},
          {"kind", r.kind == RowKind::Asserted ? "asserted" : "reported"},
          {"value", json_num(r.value)},
          {"form", r.form},
          {"tolerance", json_num(r.tolerance)},
          {"slack", json_num(r.slack)},
          {"status", r.kind == RowKind::Reported ? "report" : (r.pass ? "pass" : "fail")},
          {"seed", r.seed},
          {"detail", r.detail}};
}

inline nlohmann::json to_json(const ConstantsReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(to_json(r));
  return rows;
}

// Summary of a sample: used for constants reported over batches.
struct SampleStats {
  double min = 0, max = 0, mean = 0, median = 0, q05 = 0, q95 = 0;
  std::size_t n = 0;
};

inline SampleStats summarize(std::vector<double> v) {
  SampleStats s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  double acc = 0;
  for (double x : v) acc += x;
  s.mean = acc / v.size();
  auto q = [&](double p) { return v[static_cast<std::size_t>(std::floor(p * (v.size() - 1)))]; };
  s.median = q(0.5);
  s.q05 = q(0.05);
  s.q95 = q(0.95);
  return s;
}

}  // namespace hmlab
