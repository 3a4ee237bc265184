#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pexsim/core.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/format.hpp"

namespace pexsim {

enum class AgeCoding { Linear, Binned };

// Practice-effect indicator coding.
//   VisitDummy: column k is 1 when the visit is the k-th reassessment (level coding).
//   Cumulative: column k is 1 when at least k assessments preceded the visit (increment coding).
// The final column is top-coded in both: it absorbs every visit with j >= K + 1.
enum class PeCoding { VisitDummy, Cumulative };

// Source of the continuous age term; both give the same column.
enum class AgeSource { AgeAtVisit, BaselinePlusTime };

// Disjoint age bands [origin + width*(k-1), origin + width*k), last band closed.
struct AgeBands {
  double origin = 25.0;
  double width = 5.0;
  int n_bands = 6;

  // 1-based band index, or nullopt when the age falls outside every band.
  std::optional<int> band_of(double age) const {
    const double upper = origin + width * n_bands;
    if (!(age >= origin) || age > upper) return std::nullopt;
    if (age == upper) return n_bands;
    const int k = static_cast<int>(std::floor((age - origin) / width)) + 1;
    return std::min(k, n_bands);
  }
};

struct ModelSpec {
  AgeCoding age_coding = AgeCoding::Linear;
  AgeBands bands{};
  AgeSource age_source = AgeSource::AgeAtVisit;
  bool include_pe = false;
  PeCoding pe_coding = PeCoding::VisitDummy;
  int pe_max_level = 5;
  bool pe_by_dx = false;
  bool pe_by_age = false;
  std::vector<std::string> covariates{"educ", "gender", "race_lat"};
  bool dx_time_interaction = true;

  void validate() const {
    if ((pe_by_dx || pe_by_age) && !include_pe) {
      throw InputError("model spec: PE interactions require include_pe");
    }
    if (include_pe && pe_max_level < 1) throw InputError("model spec: pe_max_level must be >= 1");
    if (age_coding == AgeCoding::Binned && (bands.width <= 0.0 || bands.n_bands < 1)) {
      throw InputError("model spec: invalid age bands");
    }
    std::set<std::string> seen;
    for (const auto& c : covariates) {
      if (c != "educ" && c != "gender" && c != "race_lat") {
        throw InputError("model spec: unknown covariate '" + c + "'");
      }
      if (!seen.insert(c).second) throw InputError("model spec: duplicate covariate '" + c + "'");
    }
  }

  // Named presets used by the CLI: no-pe, pe, pe-by-dx, pe-by-age.
  static ModelSpec preset(const std::string& name) {
    ModelSpec s;
    if (name == "no-pe") return s;
    s.include_pe = true;
    if (name == "pe") return s;
    if (name == "pe-by-dx") {
      s.pe_by_dx = true;
      return s;
    }
    if (name == "pe-by-age") {
      s.pe_by_age = true;
      return s;
    }
    throw InputError("unknown model spec '" + name + "' (expected no-pe|pe|pe-by-dx|pe-by-age)");
  }
};

// Dense design with response and subject grouping. Rows of one subject are contiguous.
struct DesignMatrix {
  std::vector<std::string> column_labels;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::size_t> cluster_of_row;
  std::vector<ClusterRange> clusters;

  Eigen::Index n_obs() const { return x.rows(); }
  Eigen::Index n_coef() const { return x.cols(); }

  Eigen::Index column(const std::string& label) const {
    for (std::size_t i = 0; i < column_labels.size(); ++i) {
      if (column_labels[i] == label) return static_cast<Eigen::Index>(i);
    }
    return -1;
  }
};

// Wraps raw matrices. cluster_of_row must be contiguous and nondecreasing.
inline DesignMatrix make_design(std::vector<std::string> labels, Eigen::MatrixXd x, Eigen::VectorXd y,
                                std::vector<std::size_t> cluster_of_row) {
  if (x.rows() != y.size() || static_cast<std::size_t>(x.rows()) != cluster_of_row.size() ||
      static_cast<std::size_t>(x.cols()) != labels.size()) {
    throw InputError("make_design: dimension mismatch");
  }
  DesignMatrix d{std::move(labels), std::move(x), std::move(y), std::move(cluster_of_row), {}};
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= d.cluster_of_row.size(); ++i) {
    if (i == d.cluster_of_row.size() || d.cluster_of_row[i] != d.cluster_of_row[i - 1]) {
      if (i < d.cluster_of_row.size() && d.cluster_of_row[i] < d.cluster_of_row[i - 1]) {
        throw InputError("make_design: cluster ids must be contiguous and sorted");
      }
      d.clusters.push_back({begin, i});
      begin = i;
    }
  }
  return d;
}

namespace detail {

inline double covariate_value(const VisitRecord& base, const std::string& name) {
  if (name == "educ") return base.educ;
  if (name == "gender") return base.gender;
  return base.race_lat;
}

inline std::string pe_label(const ModelSpec& spec, int k) {
  return "prac" + std::to_string(k) + (spec.pe_coding == PeCoding::Cumulative ? "plus" : "");
}

// Value of PE column k (1-based) for visit j.
inline double pe_indicator(PeCoding coding, int max_level, int visit, int k) {
  const int prior = visit - 1;
  if (prior <= 0) return 0.0;
  if (coding == PeCoding::VisitDummy) return std::min(prior, max_level) == k ? 1.0 : 0.0;
  return prior >= k ? 1.0 : 0.0;
}

}  // namespace detail

// Builds the design for one of the supported mean models.
//
// Column order: intercept, age terms, dx_bin, dx_bin:t, covariates, PE terms,
// PE x dx, PE x age. Binned age uses band 1 as reference and emits indicator
// columns only for bands 2..n that contain at least one record. Covariates and
// dx come from each subject's baseline row.
inline DesignMatrix build_design(const LongitudinalDataset& data, const ModelSpec& spec) {
  spec.validate();
  const auto& recs = data.records();
  const auto n = static_cast<Eigen::Index>(recs.size());

  std::vector<int> band(recs.size(), 0);
  std::vector<int> populated;
  if (spec.age_coding == AgeCoding::Binned) {
    std::set<int> seen;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto b = spec.bands.band_of(recs[i].age_at_visit);
      if (!b) {
        throw InputError("age_at_visit " + format_roundtrip(recs[i].age_at_visit) + " of record " +
                         detail::key_string(recs[i].subject_id, recs[i].visit_index) +
                         " is outside every age band");
      }
      band[i] = *b;
      if (*b >= 2) seen.insert(*b);
    }
    populated.assign(seen.begin(), seen.end());
  }

  std::vector<std::string> labels{"(Intercept)"};
  if (spec.age_coding == AgeCoding::Linear) {
    labels.emplace_back("age_visit");
  } else {
    for (int b : populated) labels.push_back("age_band_kband" + std::to_string(b));
  }
  labels.emplace_back("dx_bin");
  if (spec.dx_time_interaction) labels.emplace_back("dx_bin:t");
  for (const auto& c : spec.covariates) labels.push_back(c);
  const int K = spec.include_pe ? spec.pe_max_level : 0;
  for (int k = 1; k <= K; ++k) labels.push_back(detail::pe_label(spec, k));
  if (spec.pe_by_dx) {
    for (int k = 1; k <= K; ++k) labels.push_back(detail::pe_label(spec, k) + ":dx_bin");
  }
  if (spec.pe_by_age) {
    for (int k = 1; k <= K; ++k) labels.push_back(detail::pe_label(spec, k) + ":age_visit");
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(labels.size()));
  Eigen::VectorXd y(n);
  std::vector<std::size_t> cluster_of_row(recs.size());

  for (std::size_t c = 0; c < data.clusters().size(); ++c) {
    const auto range = data.clusters()[c];
    const auto& base = data.baseline_of(c);
    for (std::size_t r = range.begin; r < range.end; ++r) {
      const auto& rec = recs[r];
      const auto row = static_cast<Eigen::Index>(r);
      const double t = rec.years_since_baseline;
      const double age = spec.age_source == AgeSource::AgeAtVisit ? rec.age_at_visit : base.age_at_visit + t;
      const double dx = base.dx;
      Eigen::Index col = 0;
      x(row, col++) = 1.0;
      if (spec.age_coding == AgeCoding::Linear) {
        x(row, col++) = age;
      } else {
        for (int b : populated) x(row, col++) = band[r] == b ? 1.0 : 0.0;
      }
      x(row, col++) = dx;
      if (spec.dx_time_interaction) x(row, col++) = t * dx;
      for (const auto& cov : spec.covariates) x(row, col++) = detail::covariate_value(base, cov);
      const Eigen::Index pe_start = col;
      for (int k = 1; k <= K; ++k) x(row, col++) = detail::pe_indicator(spec.pe_coding, K, rec.visit_index, k);
      if (spec.pe_by_dx) {
        for (int k = 0; k < K; ++k) x(row, col++) = x(row, pe_start + k) * dx;
      }
      if (spec.pe_by_age) {
        for (int k = 0; k < K; ++k) x(row, col++) = x(row, pe_start + k) * age;
      }
      y(row) = rec.outcome;
      cluster_of_row[r] = c;
    }
  }
  return DesignMatrix{std::move(labels), std::move(x), std::move(y), std::move(cluster_of_row), data.clusters()};
}

struct AlignedPeRow {
  double bin_lower = 0.0;
  double bin_upper = 0.0;
  std::optional<double> pe_estimate;  // empty when either group has no data
  std::size_t n_reassess = 0;
  std::size_t n_baseline = 0;
  double mean_reassess = 0.0;
  double mean_baseline = 0.0;
};

// First-reassessment practice effect by age bin: mean outcome of visit-2 rows
// minus mean outcome of visit-1 rows whose age at visit falls in the same bin.
// Bins start at `origin`, or at the youngest visit-1/2 age when not given.
inline std::vector<AlignedPeRow> aligned_pe_estimate(const LongitudinalDataset& data, double age_bin_width,
                                                     std::optional<double> origin = std::nullopt) {
  if (!(age_bin_width > 0.0)) throw InputError("aligned_pe_estimate: age_bin_width must be positive");
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (const auto& r : data.records()) {
    if (r.visit_index > 2) continue;
    lo = std::min(lo, r.age_at_visit);
    hi = std::max(hi, r.age_at_visit);
  }
  if (lo > hi) return {};
  const double start = origin.value_or(lo);
  if (lo < start) throw InputError("aligned_pe_estimate: records younger than bin origin");
  const auto n_bins = static_cast<std::size_t>(std::floor((hi - start) / age_bin_width)) + 1;

  std::vector<AlignedPeRow> rows(n_bins);
  std::vector<double> sum_re(n_bins, 0.0), sum_base(n_bins, 0.0);
  for (const auto& r : data.records()) {
    if (r.visit_index > 2) continue;
    const auto b = std::min(static_cast<std::size_t>(std::floor((r.age_at_visit - start) / age_bin_width)), n_bins - 1);
    if (r.visit_index == 2) {
      ++rows[b].n_reassess;
      sum_re[b] += r.outcome;
    } else {
      ++rows[b].n_baseline;
      sum_base[b] += r.outcome;
    }
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& row = rows[b];
    row.bin_lower = start + age_bin_width * static_cast<double>(b);
    row.bin_upper = row.bin_lower + age_bin_width;
    if (row.n_reassess > 0) row.mean_reassess = sum_re[b] / static_cast<double>(row.n_reassess);
    if (row.n_baseline > 0) row.mean_baseline = sum_base[b] / static_cast<double>(row.n_baseline);
    if (row.n_reassess > 0 && row.n_baseline > 0) row.pe_estimate = row.mean_reassess - row.mean_baseline;
  }
  return rows;
}

}  // namespace pexsim
