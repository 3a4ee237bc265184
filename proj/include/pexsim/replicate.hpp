#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pexsim/design.hpp"
#include "pexsim/format.hpp"
#include "pexsim/gee.hpp"
#include "pexsim/lmm.hpp"
#include "pexsim/report.hpp"
#include "pexsim/simulate.hpp"

namespace pexsim {

// Value of the coefficient labelled `term` under the generating model, when
// the term has one. Binned age terms have no single generating value.
inline std::optional<double> generating_value(const SimulationConfig& sim, const ModelSpec& spec,
                                              const std::string& term) {
  const bool linear = spec.age_coding == AgeCoding::Linear;
  if (term == "(Intercept)") return linear ? std::optional<double>(sim.beta0) : std::nullopt;
  if (term == "age_visit") return sim.beta1;
  if (term == "dx_bin") return sim.beta2;
  if (term == "dx_bin:t") return sim.beta3;
  if (term == "educ") return sim.beta4[0];
  if (term == "gender") return sim.beta4[1];
  if (term == "race_lat") return sim.beta4[2];
  if (term.rfind("prac", 0) != 0) return std::nullopt;

  std::size_t pos = 4;
  int k = 0;
  while (pos < term.size() && std::isdigit(static_cast<unsigned char>(term[pos]))) k = k * 10 + (term[pos++] - '0');
  const bool cumulative = term.compare(pos, 4, "plus") == 0;
  if (cumulative) pos += 4;
  const std::string suffix = term.substr(pos);
  const std::vector<double>* levels = nullptr;
  if (suffix.empty()) {
    levels = &sim.pe_beta5;
  } else if (suffix == ":dx_bin") {
    levels = &sim.pe_beta6_dx;
  } else if (suffix == ":age_visit") {
    levels = &sim.pe_beta7_age;
  } else {
    return std::nullopt;
  }
  auto level = [&](int visit) { return detail::pe_level(*levels, visit); };
  const int K = spec.pe_max_level;
  if (k < 1 || k > K) return std::nullopt;
  // The top-coded column pools visits K+1..n_visits; only defined if they share one level.
  if (k == K) {
    for (int v = K + 2; v <= sim.n_visits; ++v) {
      if (level(v) != level(K + 1)) return std::nullopt;
    }
  }
  if (!cumulative) return level(k + 1);
  return level(k + 1) - level(k);
}

struct ReplicationPlan {
  SimulationConfig sim{};
  ModelSpec model{};
  Engine engine = Engine::Gee;
  WorkingCorrelation working = WorkingCorrelation::Exchangeable;
  int n_reps = 100;
  std::uint64_t first_seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct ReplicateFit {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  bool converged = false;
  std::vector<std::string> terms;
  std::vector<double> estimates;
  std::vector<double> std_errors;
};

struct TermSummary {
  std::string term;
  std::optional<double> truth;
  std::size_t n = 0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;     // NaN without a generating value
  double empirical_se = 0.0;  // SD of estimates across replicates
  double mean_se = 0.0;       // mean model-based (robust for GEE) SE
  double coverage = 0.0;      // share of nominal 95% intervals containing the truth
};

struct ReplicationResult {
  std::vector<ReplicateFit> fits;  // ordered by seed
  std::vector<TermSummary> summary;
  std::size_t n_failed = 0;
};

inline ReplicateFit run_one_replicate(const ReplicationPlan& plan, std::uint64_t seed) {
  ReplicateFit out;
  out.seed = seed;
  try {
    auto sim = plan.sim;
    sim.seed = seed;
    const auto data = simulate_cohorts(sim);
    if (plan.engine == Engine::Gee) {
      const auto fit = fit_gee(data, plan.model, plan.working);
      out.terms = fit.labels;
      out.estimates.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
      out.std_errors.assign(fit.robust_se.data(), fit.robust_se.data() + fit.robust_se.size());
      out.converged = fit.converged;
    } else {
      const auto fit = fit_lmm(data, plan.model);
      out.terms = fit.labels;
      out.estimates.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
      out.std_errors.assign(fit.std_errors.data(), fit.std_errors.data() + fit.std_errors.size());
      out.converged = fit.converged;
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

// Runs seeds first_seed .. first_seed + n_reps - 1, possibly concurrently.
// Results are stored by seed, so the output does not depend on scheduling.
inline ReplicationResult run_replications(const ReplicationPlan& plan) {
  if (plan.n_reps < 1) throw InputError("replicate: n_reps must be >= 1");
  plan.sim.validate();
  plan.model.validate();

  ReplicationResult res;
  res.fits.resize(static_cast<std::size_t>(plan.n_reps));
  unsigned workers = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(plan.n_reps));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < res.fits.size(); i = next++) {
      res.fits[i] = run_one_replicate(plan, plan.first_seed + i);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  const ReplicateFit* ref = nullptr;
  for (const auto& f : res.fits) {
    if (!f.ok) {
      ++res.n_failed;
    } else if (!ref) {
      ref = &f;
    }
  }
  if (!ref) return res;

  constexpr double z975 = 1.959963984540054;
  for (std::size_t k = 0; k < ref->terms.size(); ++k) {
    TermSummary s;
    s.term = ref->terms[k];
    s.truth = generating_value(plan.sim, plan.model, s.term);
    double sum = 0.0, sum_sq = 0.0, sum_se = 0.0;
    std::size_t covered = 0;
    for (const auto& f : res.fits) {
      if (!f.ok) continue;
      const double est = f.estimates[k];
      const double se = f.std_errors[k];
      sum += est;
      sum_sq += est * est;
      sum_se += se;
      if (s.truth && std::abs(est - *s.truth) <= z975 * se) ++covered;
      ++s.n;
    }
    const double n = static_cast<double>(s.n);
    s.mean_estimate = sum / n;
    s.mean_bias = s.truth ? s.mean_estimate - *s.truth : std::nan("");
    s.empirical_se = s.n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean_estimate * s.mean_estimate) / (n - 1.0))) : 0.0;
    s.mean_se = sum_se / n;
    s.coverage = s.truth ? static_cast<double>(covered) / n : std::nan("");
    res.summary.push_back(std::move(s));
  }
  return res;
}

inline const TermSummary* find_term(const ReplicationResult& r, const std::string& term) {
  for (const auto& s : r.summary) {
    if (s.term == term) return &s;
  }
  return nullptr;
}

// Wide layout, one row per seed: seed,ok,converged,<term>,<term>_se,...
inline std::string replicates_csv(const ReplicationResult& r) {
  std::vector<std::string> terms;
  for (const auto& f : r.fits) {
    if (f.ok) {
      terms = f.terms;
      break;
    }
  }
  std::ostringstream os;
  os << "seed,ok,converged";
  for (const auto& t : terms) os << ',' << detail::csv_field(t) << ',' << detail::csv_field(t + "_se");
  os << '\n';
  for (const auto& f : r.fits) {
    os << f.seed << ',' << (f.ok ? 1 : 0) << ',' << (f.converged ? 1 : 0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      if (f.ok) {
        os << ',' << format_roundtrip(f.estimates[k]) << ',' << format_roundtrip(f.std_errors[k]);
      } else {
        os << ",NA,NA";
      }
    }
    os << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const ReplicationResult& r) {
  std::ostringstream os;
  os << "term,truth,n,mean_estimate,mean_bias,empirical_se,mean_se,coverage\n";
  for (const auto& s : r.summary) {
    os << detail::csv_field(s.term) << ',' << (s.truth ? format_roundtrip(*s.truth) : "NA") << ',' << s.n << ','
       << format_estimate(s.mean_estimate, 8, 6) << ',' << format_estimate(s.mean_bias, 8, 6) << ','
       << format_estimate(s.empirical_se, 8, 6) << ',' << format_estimate(s.mean_se, 8, 6) << ','
       << format_estimate(s.coverage, 4) << '\n';
  }
  return os.str();
}

}  // namespace pexsim
