#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <system_error>

#include "pexsim/errors.hpp"

namespace pexsim {

// Shortest decimal that parses back to the same double. Locale independent.
inline std::string format_roundtrip(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fixed `digits` decimals for |v| >= 1e-4, scientific with `sci_digits` otherwise.
inline std::string format_estimate(double v, int digits = 5, int sci_digits = 2) {
  if (!std::isfinite(v)) return std::isnan(v) ? "NA" : (v > 0 ? "Inf" : "-Inf");
  char buf[64];
  if (v != 0.0 && std::abs(v) < 1e-4) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, sci_digits);
    return std::string(buf, res.ptr);
  }
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, res.ptr);
}

// p-values below 2e-16 print as "<2e-16".
inline std::string format_pvalue(double p) {
  if (std::isnan(p)) return "NA";
  if (p < 2e-16) return "<2e-16";
  return format_estimate(p, 5);
}

// Parses a number written by any of the formatters above ("<2e-16" -> 2e-16, "NA" -> NaN).
inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "NA" || s == "NaN" || s == "nan") return std::nan("");
  if (s == "Inf") return HUGE_VAL;
  if (s == "-Inf") return -HUGE_VAL;
  if (!s.empty() && s.front() == '<') s.remove_prefix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_integer(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace pexsim
