#pragma once

#include <array>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pexsim/core.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/format.hpp"

namespace pexsim {

inline constexpr std::string_view kDatasetHeader =
    "subject_id,visit_index,years_since_baseline,age_at_visit,dx,educ,gender,race_lat,outcome";

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

// Column lookup by header name; missing required names are collected for one error.
class HeaderIndex {
 public:
  explicit HeaderIndex(const std::vector<std::string>& header) : header_(header) {}

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == name) return i;
    }
    return std::nullopt;
  }

  std::size_t require(std::string_view name) {
    if (auto i = find(name)) return *i;
    missing_.emplace_back(name);
    return 0;
  }

  void throw_if_missing() const {
    if (missing_.empty()) return;
    std::string msg = "schema mismatch: missing column(s):";
    for (const auto& m : missing_) msg += " " + m;
    throw InputError(msg);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> missing_;
};

inline bool read_nonblank_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

}  // namespace detail

struct CsvReadOptions {
  // Rows carry days_since_baseline instead of visit_index/years_since_baseline;
  // timing is rebuilt with derive_timing().
  bool days_column = false;
};

// Reads the long-format dataset CSV. Columns are matched by header name.
inline std::vector<VisitRecord> read_dataset_csv(std::istream& in, const CsvReadOptions& opts = {}) {
  std::string line;
  if (!detail::read_nonblank_line(in, line)) {
    throw InputError("schema mismatch: empty input, expected header: " + std::string(kDatasetHeader));
  }
  detail::HeaderIndex idx(detail::split_csv_line(line));
  const auto c_subject = idx.require("subject_id");
  std::size_t c_visit = 0, c_years = 0, c_days = 0;
  if (opts.days_column) {
    c_days = idx.require("days_since_baseline");
  } else {
    c_visit = idx.require("visit_index");
    c_years = idx.require("years_since_baseline");
  }
  const auto c_age = idx.require("age_at_visit");
  const auto c_dx = idx.require("dx");
  const auto c_educ = idx.require("educ");
  const auto c_gender = idx.require("gender");
  const auto c_race = idx.require("race_lat");
  const auto c_outcome = idx.require("outcome");
  idx.throw_if_missing();

  std::vector<VisitRecord> records;
  std::vector<DayRecord> day_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    try {
      auto at = [&](std::size_t c) -> const std::string& {
        if (c >= f.size()) throw InputError("too few fields");
        return f[c];
      };
      if (opts.days_column) {
        DayRecord r;
        r.subject_id = at(c_subject);
        r.days_since_baseline = parse_integer(at(c_days));
        r.age_at_visit = parse_double(at(c_age));
        r.dx = static_cast<int>(parse_integer(at(c_dx)));
        r.educ = parse_double(at(c_educ));
        r.gender = static_cast<int>(parse_integer(at(c_gender)));
        r.race_lat = parse_double(at(c_race));
        r.outcome = parse_double(at(c_outcome));
        day_rows.push_back(std::move(r));
      } else {
        VisitRecord r;
        r.subject_id = at(c_subject);
        r.visit_index = static_cast<int>(parse_integer(at(c_visit)));
        r.years_since_baseline = parse_double(at(c_years));
        r.age_at_visit = parse_double(at(c_age));
        r.dx = static_cast<int>(parse_integer(at(c_dx)));
        r.educ = parse_double(at(c_educ));
        r.gender = static_cast<int>(parse_integer(at(c_gender)));
        r.race_lat = parse_double(at(c_race));
        r.outcome = parse_double(at(c_outcome));
        records.push_back(std::move(r));
      }
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (opts.days_column) records = derive_timing(std::move(day_rows));
  if (records.empty()) throw InputError("schema mismatch: header present but no data rows");
  return records;
}

inline std::vector<VisitRecord> read_dataset_csv(const std::string& path, const CsvReadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_dataset_csv(in, opts);
}

inline void write_dataset_csv(std::ostream& out, const LongitudinalDataset& data) {
  out << kDatasetHeader << '\n';
  for (const auto& r : data.records()) {
    out << detail::csv_field(r.subject_id) << ',' << r.visit_index << ','
        << format_roundtrip(r.years_since_baseline) << ',' << format_roundtrip(r.age_at_visit) << ','
        << r.dx << ',' << format_roundtrip(r.educ) << ',' << r.gender << ','
        << format_roundtrip(r.race_lat) << ',' << format_roundtrip(r.outcome) << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const LongitudinalDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset_csv(out, data);
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace pexsim
