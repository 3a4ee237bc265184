#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pexsim/errors.hpp"

namespace pexsim {

inline constexpr double kDaysPerYear = 365.25;
inline constexpr double kTimingTolerance = 1e-9;

// One subject-visit row.
struct VisitRecord {
  std::string subject_id;
  int visit_index = 1;  // 1 = baseline
  double years_since_baseline = 0.0;
  double age_at_visit = 0.0;
  int dx = 0;  // 0 = HC, 1 = SZ
  double educ = 0.0;
  int gender = 0;
  double race_lat = 0.0;  // single numeric regressor (binary Hispanic/Latino indicator by convention)
  double outcome = 0.0;

  double age_at_baseline() const { return age_at_visit - years_since_baseline; }

  friend bool operator==(const VisitRecord&, const VisitRecord&) = default;
};

// Half-open row range [begin, end) of one subject inside a sorted record set.
struct ClusterRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const ClusterRange&, const ClusterRange&) = default;
};

class LongitudinalDataset;
LongitudinalDataset validate_dataset(std::vector<VisitRecord> records);

// Validated, subject-grouped, sorted collection of visit records.
//
// Only validate_dataset() constructs one, so every instance satisfies:
// every subject has a baseline (visit 1, t = 0), no duplicate
// (subject, visit) keys, time strictly increasing in visit index, and a
// constant age_at_visit - years_since_baseline within each subject.
class LongitudinalDataset {
 public:
  const std::vector<VisitRecord>& records() const { return records_; }
  const std::vector<ClusterRange>& clusters() const { return clusters_; }
  int max_visits() const { return max_visits_; }
  std::size_t n_subjects() const { return clusters_.size(); }
  std::size_t n_records() const { return records_.size(); }

  // Subjects excluded for lacking a baseline visit, in sorted order.
  const std::vector<std::string>& dropped_subjects() const { return dropped_; }

  // Baseline row of the given cluster.
  const VisitRecord& baseline_of(std::size_t cluster) const {
    return records_[clusters_[cluster].begin];
  }

  friend bool operator==(const LongitudinalDataset& a, const LongitudinalDataset& b) {
    return a.records_ == b.records_ && a.max_visits_ == b.max_visits_;
  }

 private:
  LongitudinalDataset() = default;
  friend LongitudinalDataset validate_dataset(std::vector<VisitRecord> records);

  std::vector<VisitRecord> records_;
  std::vector<ClusterRange> clusters_;
  std::vector<std::string> dropped_;
  int max_visits_ = 0;
};

namespace detail {

inline std::string key_string(const std::string& subject, int visit) {
  return "(" + subject + ", " + std::to_string(visit) + ")";
}

}  // namespace detail

// Sorts, checks, and groups raw records. Subjects without a baseline visit
// are dropped (see dropped_subjects()); everything else that violates the
// dataset invariants is rejected with InputError.
inline LongitudinalDataset validate_dataset(std::vector<VisitRecord> records) {
  if (records.empty()) throw InputError("validate_dataset: no records");

  std::stable_sort(records.begin(), records.end(), [](const VisitRecord& a, const VisitRecord& b) {
    if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
    return a.visit_index < b.visit_index;
  });

  LongitudinalDataset out;
  out.records_.reserve(records.size());

  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].subject_id == records[i].subject_id) ++j;

    for (std::size_t k = i; k < j; ++k) {
      const auto& r = records[k];
      if (r.visit_index < 1) {
        throw InputError("invalid visit_index " + std::to_string(r.visit_index) + " for record " +
                         detail::key_string(r.subject_id, r.visit_index));
      }
      if (k > i && records[k - 1].visit_index == r.visit_index) {
        throw InputError("duplicate record " + detail::key_string(r.subject_id, r.visit_index));
      }
      if (!std::isfinite(r.years_since_baseline) || !std::isfinite(r.age_at_visit) ||
          !std::isfinite(r.outcome)) {
        throw InputError("non-finite value in record " + detail::key_string(r.subject_id, r.visit_index));
      }
    }

    if (records[i].visit_index != 1) {
      out.dropped_.push_back(records[i].subject_id);
      i = j;
      continue;
    }

    const auto& base = records[i];
    if (std::abs(base.years_since_baseline) > kTimingTolerance) {
      throw InputError("baseline record " + detail::key_string(base.subject_id, 1) +
                       " has nonzero years_since_baseline");
    }
    const double age1 = base.age_at_visit;
    for (std::size_t k = i + 1; k < j; ++k) {
      const auto& r = records[k];
      if (!(r.years_since_baseline > records[k - 1].years_since_baseline)) {
        throw InputError("years_since_baseline not strictly increasing at " +
                         detail::key_string(r.subject_id, r.visit_index));
      }
      if (std::abs(r.age_at_visit - (age1 + r.years_since_baseline)) > kTimingTolerance) {
        throw InputError("age_at_visit != baseline age + years_since_baseline at " +
                         detail::key_string(r.subject_id, r.visit_index));
      }
    }

    const std::size_t begin = out.records_.size();
    for (std::size_t k = i; k < j; ++k) {
      out.max_visits_ = std::max(out.max_visits_, records[k].visit_index);
      out.records_.push_back(std::move(records[k]));
    }
    out.clusters_.push_back({begin, out.records_.size()});
    i = j;
  }

  if (out.records_.empty()) {
    throw InputError("validate_dataset: no subjects left after excluding " +
                     std::to_string(out.dropped_.size()) + " without a baseline visit");
  }
  return out;
}

// Raw row keyed by days since baseline instead of visit number.
struct DayRecord {
  std::string subject_id;
  std::int64_t days_since_baseline = 0;
  double age_at_visit = 0.0;
  int dx = 0;
  double educ = 0.0;
  int gender = 0;
  double race_lat = 0.0;
  double outcome = 0.0;
};

// Converts day offsets to years and numbers visits in time order.
//
// A subject whose earliest row is not day 0 has no baseline; its visits are
// numbered from 2 so that validate_dataset() excludes it. Ages are rebuilt
// as baseline age + years so the timing identity holds exactly.
inline std::vector<VisitRecord> derive_timing(std::vector<DayRecord> rows) {
  for (const auto& r : rows) {
    if (r.days_since_baseline < 0) {
      throw InputError("negative days_since_baseline for subject " + r.subject_id);
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const DayRecord& a, const DayRecord& b) {
    if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
    return a.days_since_baseline < b.days_since_baseline;
  });

  std::vector<VisitRecord> out;
  out.reserve(rows.size());
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].subject_id == rows[i].subject_id) ++j;
    const bool has_baseline = rows[i].days_since_baseline == 0;
    const double age1 = rows[i].age_at_visit - static_cast<double>(rows[i].days_since_baseline) / kDaysPerYear;
    for (std::size_t k = i; k < j; ++k) {
      const auto& r = rows[k];
      if (k > i && r.days_since_baseline == rows[k - 1].days_since_baseline) {
        throw InputError("repeated days_since_baseline " + std::to_string(r.days_since_baseline) +
                         " for subject " + r.subject_id);
      }
      VisitRecord v;
      v.subject_id = r.subject_id;
      v.visit_index = static_cast<int>(k - i) + (has_baseline ? 1 : 2);
      v.years_since_baseline = static_cast<double>(r.days_since_baseline) / kDaysPerYear;
      v.age_at_visit = age1 + v.years_since_baseline;
      v.dx = r.dx;
      v.educ = r.educ;
      v.gender = r.gender;
      v.race_lat = r.race_lat;
      v.outcome = r.outcome;
      out.push_back(std::move(v));
    }
    i = j;
  }
  return out;
}

}  // namespace pexsim
