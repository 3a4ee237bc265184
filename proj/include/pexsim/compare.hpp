#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pexsim/design.hpp"
#include "pexsim/format.hpp"
#include "pexsim/gee.hpp"
#include "pexsim/lmm.hpp"
#include "pexsim/report.hpp"
#include "pexsim/svg.hpp"

namespace pexsim {

struct FitSummary {
  std::string name;
  bool ok = false;
  std::string error;
  CoefTable table;
};

struct TermDelta {
  std::string term;
  double first = 0.0;
  double second = 0.0;
  double delta = 0.0;  // second - first
};

struct TrajectoryPoint {
  double age = 0.0;
  int dx = 0;
  std::size_t n = 0;
  double mean_observed = 0.0;
  double mean_pe_adjusted = 0.0;
};

// Four-fit battery (LMM / GEE x without / with practice effects) and what it implies
// about masking of age-related decline.
struct ComparisonReport {
  FitSummary lmm_no_pe, gee_no_pe, lmm_pe, gee_pe;
  std::vector<TermDelta> engine_deltas;  // no-PE spec: first = LMM, second = GEE
  std::vector<TermDelta> pe_deltas;      // GEE: first = no-PE, second = with-PE
  std::vector<TrajectoryPoint> trajectory;
  std::optional<double> age_slope_no_pe;
  std::optional<double> age_slope_with_pe;
  std::optional<double> max_engine_abs_diff;
  bool masking = false;
  std::string verdict;
};

namespace detail {

template <class FitFn>
FitSummary run_summary(std::string name, FitFn fn) {
  FitSummary s;
  s.name = std::move(name);
  try {
    s.table = fn();
    s.table.title = s.name;
    s.ok = true;
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  return s;
}

inline std::vector<TermDelta> paired_deltas(const FitSummary& a, const FitSummary& b) {
  std::vector<TermDelta> out;
  if (!a.ok || !b.ok) return out;
  for (const auto& r : a.table.rows) {
    if (const auto* other = b.table.find(r.term)) {
      out.push_back({r.term, r.estimate, other->estimate, other->estimate - r.estimate});
    }
  }
  return out;
}

inline std::optional<double> age_slope(const FitSummary& s) {
  if (!s.ok) return std::nullopt;
  if (const auto* r = s.table.find("age_visit")) return r->estimate;
  return std::nullopt;
}

}  // namespace detail

// Runs every fit independently; a failing fit is recorded and the rest of the
// report is still produced. Requires at least three visits.
inline ComparisonReport run_comparison(const LongitudinalDataset& data,
                                       WorkingCorrelation working = WorkingCorrelation::Exchangeable) {
  if (data.max_visits() < 3) throw InputError("compare: dataset needs at least 3 visits");
  const auto no_pe = ModelSpec::preset("no-pe");
  auto with_pe = ModelSpec::preset("pe");
  with_pe.pe_max_level = std::min(with_pe.pe_max_level, data.max_visits() - 1);

  ComparisonReport rep;
  rep.lmm_no_pe = detail::run_summary("LMM without PE", [&] { return make_table(fit_lmm(data, no_pe)); });
  rep.gee_no_pe = detail::run_summary("GEE without PE", [&] { return make_table(fit_gee(data, no_pe, working)); });
  rep.lmm_pe = detail::run_summary("LMM with PE", [&] { return make_table(fit_lmm(data, with_pe)); });
  std::optional<GeeFit> gee_pe_fit;
  rep.gee_pe = detail::run_summary("GEE with PE", [&] {
    gee_pe_fit = fit_gee(data, with_pe, working);
    return make_table(*gee_pe_fit);
  });

  rep.engine_deltas = detail::paired_deltas(rep.lmm_no_pe, rep.gee_no_pe);
  if (!rep.engine_deltas.empty()) {
    double m = 0.0;
    for (const auto& d : rep.engine_deltas) m = std::max(m, std::abs(d.delta));
    rep.max_engine_abs_diff = m;
  }
  rep.pe_deltas = detail::paired_deltas(rep.gee_no_pe, rep.gee_pe);

  // Prefer GEE slopes; fall back to the LMM pair when a GEE fit failed.
  rep.age_slope_no_pe = detail::age_slope(rep.gee_no_pe);
  rep.age_slope_with_pe = detail::age_slope(rep.gee_pe);
  if (!rep.age_slope_no_pe || !rep.age_slope_with_pe) {
    rep.age_slope_no_pe = detail::age_slope(rep.lmm_no_pe);
    rep.age_slope_with_pe = detail::age_slope(rep.lmm_pe);
  }
  if (rep.age_slope_no_pe && rep.age_slope_with_pe) {
    const double a = *rep.age_slope_no_pe, b = *rep.age_slope_with_pe;
    std::ostringstream os;
    os << "age slope no-PE " << (a > b ? ">" : "<=") << " age slope with-PE (" << format_estimate(a, 5) << " vs "
       << format_estimate(b, 5) << ", shift " << format_estimate(a - b, 5) << "/yr); with-PE slope "
       << (b < 0 ? "negative" : "non-negative");
    rep.masking = a > b && b < 0;
    if (rep.masking) os << ": unmodeled practice effects mask age-related decline";
    rep.verdict = os.str();
  } else {
    rep.verdict = "undetermined: an age-slope fit failed";
  }

  // Observed and PE-adjusted mean outcome by (rounded age at visit, dx).
  const auto design = build_design(data, with_pe);
  Eigen::VectorXd pe_part = Eigen::VectorXd::Zero(design.n_obs());
  if (gee_pe_fit) {
    for (Eigen::Index j = 0; j < design.n_coef(); ++j) {
      if (design.column_labels[static_cast<std::size_t>(j)].rfind("prac", 0) == 0) {
        pe_part += design.x.col(j) * gee_pe_fit->coefficients(j);
      }
    }
  }
  std::map<std::pair<long, int>, TrajectoryPoint> cells;
  const auto& recs = data.records();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const long age = std::lround(recs[i].age_at_visit);
    const int dx = data.baseline_of(design.cluster_of_row[i]).dx;
    auto& c = cells[{age, dx}];
    c.age = static_cast<double>(age);
    c.dx = dx;
    ++c.n;
    c.mean_observed += recs[i].outcome;
    c.mean_pe_adjusted += recs[i].outcome - pe_part(static_cast<Eigen::Index>(i));
  }
  for (auto& [key, c] : cells) {
    c.mean_observed /= static_cast<double>(c.n);
    c.mean_pe_adjusted /= static_cast<double>(c.n);
    rep.trajectory.push_back(c);
  }
  return rep;
}

inline std::string comparison_text(const ComparisonReport& r) {
  std::ostringstream os;
  for (const auto* s : {&r.lmm_no_pe, &r.gee_no_pe, &r.lmm_pe, &r.gee_pe}) {
    if (s->ok) {
      os << to_text(s->table) << '\n';
    } else {
      os << s->name << ": FAILED: " << s->error << "\n\n";
    }
  }
  if (r.max_engine_abs_diff) {
    os << "LMM vs GEE (without PE): max |difference| = " << format_estimate(*r.max_engine_abs_diff, 6) << '\n';
  }
  os << "Masking: " << r.verdict << '\n';
  return os.str();
}

// kind,term,first,second,delta
inline std::string comparison_csv(const ComparisonReport& r) {
  std::ostringstream os;
  os << "kind,term,first,second,delta\n";
  auto emit = [&](const char* kind, const std::vector<TermDelta>& ds) {
    for (const auto& d : ds) {
      os << kind << ',' << detail::csv_field(d.term) << ',' << format_estimate(d.first, 8, 6) << ','
         << format_estimate(d.second, 8, 6) << ',' << format_estimate(d.delta, 8, 6) << '\n';
    }
  };
  emit("lmm_vs_gee", r.engine_deltas);
  emit("nope_vs_pe", r.pe_deltas);
  return os.str();
}

inline std::string engine_scatter_svg(const ComparisonReport& r) {
  svg::Series s{"coefficients (without PE)", "#1f77b4", svg::Mark::Points, false, {}, {}};
  for (const auto& d : r.engine_deltas) {
    s.points.push_back({d.first, d.second});
    s.point_labels.push_back(d.term);
  }
  return svg::Chart("LME vs GEE Estimates (Without PE)", "LME estimate", "GEE estimate").add(s).diagonal().render();
}

inline std::string pe_scatter_svg(const ComparisonReport& r) {
  svg::Series s{"GEE coefficients", "#d62728", svg::Mark::Points, false, {}, {}};
  for (const auto& d : r.pe_deltas) {
    s.points.push_back({d.first, d.second});
    s.point_labels.push_back(d.term);
  }
  return svg::Chart("With vs Without PE Comparison", "estimate without PE", "estimate with PE")
      .add(s)
      .diagonal()
      .render();
}

inline std::string trajectory_svg(const ComparisonReport& r) {
  svg::Chart chart("Outcome over Age at Visit", "age at visit (years)", "mean outcome");
  const char* colors[2] = {"#1f77b4", "#d62728"};
  const char* names[2] = {"HC", "SZ"};
  for (int dx = 0; dx < 2; ++dx) {
    svg::Series observed{std::string(names[dx]) + " observed", colors[dx], svg::Mark::LineAndPoints, false, {}, {}};
    svg::Series adjusted{std::string(names[dx]) + " PE-adjusted", colors[dx], svg::Mark::Line, true, {}, {}};
    for (const auto& p : r.trajectory) {
      if (p.dx != dx) continue;
      observed.points.push_back({p.age, p.mean_observed});
      adjusted.points.push_back({p.age, p.mean_pe_adjusted});
    }
    if (observed.points.empty()) continue;
    chart.add(std::move(observed));
    chart.add(std::move(adjusted));
  }
  return chart.render();
}

}  // namespace pexsim
