#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pexsim/csv.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/format.hpp"
#include "pexsim/gee.hpp"
#include "pexsim/lmm.hpp"

namespace pexsim {

enum class Engine { Lmm, Gee };

inline const char* engine_name(Engine e) { return e == Engine::Lmm ? "lmm" : "gee"; }

struct CoefRow {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double stat = 0.0;  // Wald chi-square (GEE) or t (LMM)
  double p = 1.0;
  std::optional<double> df;  // LMM only
};

// One fitted model in table form. GEE tables follow the Estimate / Std. Err /
// Wald / p-value layout; LMM tables add containment DF and use t statistics.
struct CoefTable {
  Engine engine = Engine::Gee;
  std::string title;
  std::vector<CoefRow> rows;

  const CoefRow* find(const std::string& term) const {
    for (const auto& r : rows) {
      if (r.term == term) return &r;
    }
    return nullptr;
  }
};

inline CoefTable make_table(const GeeFit& fit, std::string title = {}) {
  CoefTable t{Engine::Gee, std::move(title), {}};
  for (std::size_t i = 0; i < fit.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.rows.push_back({fit.labels[i], fit.coefficients(k), fit.robust_se(k), fit.wald_stats(k), fit.p_values(k), {}});
  }
  return t;
}

inline CoefTable make_table(const LmmFit& fit, std::string title = {}) {
  CoefTable t{Engine::Lmm, std::move(title), {}};
  for (std::size_t i = 0; i < fit.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.rows.push_back(
        {fit.labels[i], fit.coefficients(k), fit.std_errors(k), fit.test_stats(k), fit.p_values(k), fit.df[i]});
  }
  return t;
}

// Column-aligned console rendering.
inline std::string to_text(const CoefTable& t) {
  const bool lmm = t.engine == Engine::Lmm;
  std::vector<std::vector<std::string>> cells;
  cells.push_back(lmm ? std::vector<std::string>{"Term", "Estimate", "Std. Error", "DF", "t-value", "p-value"}
                      : std::vector<std::string>{"Term", "Estimate", "Std. Err", "Wald", "p-value"});
  for (const auto& r : t.rows) {
    std::vector<std::string> row{r.term, format_estimate(r.estimate, 5), format_estimate(r.se, 5)};
    if (lmm) row.push_back(r.df ? format_estimate(*r.df, 0) : "NA");
    row.push_back(format_estimate(r.stat, 2));
    row.push_back(format_pvalue(r.p));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  if (!t.title.empty()) os << t.title << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const auto& s = cells[r][c];
      const std::string pad(width[c] - s.size(), ' ');
      if (c == 0) {
        os << s << pad;
      } else {
        os << "  " << pad << s;
      }
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

// Machine-readable form: term,estimate,se,stat,p[,df].
inline std::string to_csv(const CoefTable& t) {
  const bool lmm = t.engine == Engine::Lmm;
  std::ostringstream os;
  os << "term,estimate,se,stat,p" << (lmm ? ",df" : "") << '\n';
  for (const auto& r : t.rows) {
    os << detail::csv_field(r.term) << ',' << format_estimate(r.estimate, 8, 6) << ','
       << format_estimate(r.se, 8, 6) << ',' << format_estimate(r.stat, 6, 6) << ',' << format_pvalue(r.p);
    if (lmm) os << ',' << (r.df ? format_estimate(*r.df, 0) : "NA");
    os << '\n';
  }
  return os.str();
}

inline CoefTable parse_table_csv(std::istream& in) {
  std::string line;
  if (!detail::read_nonblank_line(in, line)) throw InputError("coefficient table: empty input");
  detail::HeaderIndex idx(detail::split_csv_line(line));
  const auto c_term = idx.require("term");
  const auto c_est = idx.require("estimate");
  const auto c_se = idx.require("se");
  const auto c_stat = idx.require("stat");
  const auto c_p = idx.require("p");
  idx.throw_if_missing();
  const auto c_df = idx.find("df");

  CoefTable t{c_df ? Engine::Lmm : Engine::Gee, {}, {}};
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    const std::size_t need = std::max({c_term, c_est, c_se, c_stat, c_p, c_df.value_or(0)});
    if (f.size() <= need) throw InputError("coefficient table: short row '" + line + "'");
    CoefRow r{f[c_term], parse_double(f[c_est]), parse_double(f[c_se]), parse_double(f[c_stat]),
              parse_double(f[c_p]), {}};
    if (c_df) r.df = parse_double(f[*c_df]);
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace pexsim
