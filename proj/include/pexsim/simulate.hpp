#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pexsim/core.hpp"
#include "pexsim/errors.hpp"

namespace pexsim {

// Baseline covariate generators. Education is a rounded, clamped normal.
struct CovariateModel {
  double p_sz = 0.5;
  double educ_mean = 13.5;
  double educ_sd = 2.0;
  double educ_min = 8.0;
  double educ_max = 20.0;
  double p_gender = 0.5;
  double p_race_lat = 0.3;
};

struct SimulationConfig {
  int n_per_cohort = 100;
  std::vector<double> cohort_baseline_ages{25.0, 30.0, 35.0, 40.0, 45.0};
  int n_visits = 6;  // visits at t = 0, 1, ..., n_visits - 1 years

  double beta0 = 0.326;
  double beta1 = -0.007;  // per year of age at visit
  double beta2 = -0.782;  // dx
  double beta3 = 0.013;   // dx x years since baseline
  std::array<double, 3> beta4{0.098, 0.034, -0.077};  // educ, gender, race_lat

  // Practice-effect level for reassessment k (visit k + 1), k = 1..; the last
  // entry carries over to later visits. Empty means no practice effects.
  std::vector<double> pe_beta5{0.2, 0.3, 0.4, 0.5, 0.5};
  std::vector<double> pe_beta6_dx;   // extra PE for SZ, same indexing
  std::vector<double> pe_beta7_age;  // PE change per year of age at visit, same indexing

  double sigma2 = 0.155 * 0.155;
  double rho = 0.753;
  CovariateModel covariate_model{};
  std::uint64_t seed = 1;

  void validate() const {
    if (n_per_cohort < 1) throw InputError("simulation: n_per_cohort must be >= 1");
    if (cohort_baseline_ages.empty()) throw InputError("simulation: no cohorts");
    if (n_visits < 1) throw InputError("simulation: n_visits must be >= 1");
    if (!(sigma2 > 0.0)) throw InputError("simulation: sigma2 must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw InputError("simulation: rho must lie in [0, 1)");
    const auto max_levels = static_cast<std::size_t>(n_visits - 1);
    if (pe_beta5.size() > max_levels || pe_beta6_dx.size() > max_levels || pe_beta7_age.size() > max_levels) {
      throw InputError("simulation: more PE levels than reassessments");
    }
    const auto& cm = covariate_model;
    for (double p : {cm.p_sz, cm.p_gender, cm.p_race_lat}) {
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("simulation: covariate probability outside [0, 1]");
    }
    if (!(cm.educ_sd >= 0.0) || cm.educ_min > cm.educ_max) {
      throw InputError("simulation: invalid education model");
    }
  }

  // Configuration without injected practice effects.
  static SimulationConfig no_pe() {
    SimulationConfig c;
    c.pe_beta5.clear();
    return c;
  }

  // Named generating scenarios: no-pe, pe, pe-by-dx (SZ gains 0.1 less at
  // every reassessment), pe-by-age (gains shrink by 0.003 per year of age).
  static SimulationConfig scenario(const std::string& name) {
    SimulationConfig c;
    if (name == "no-pe") return no_pe();
    if (name == "pe") return c;
    if (name == "pe-by-dx") {
      c.pe_beta6_dx.assign(c.pe_beta5.size(), -0.1);
      return c;
    }
    if (name == "pe-by-age") {
      c.pe_beta7_age.assign(c.pe_beta5.size(), -0.003);
      return c;
    }
    throw InputError("unknown scenario '" + name + "' (expected no-pe|pe|pe-by-dx|pe-by-age)");
  }
};

struct SubjectCovariates {
  double age_at_baseline = 25.0;
  int dx = 0;
  double educ = 0.0;
  int gender = 0;
  double race_lat = 0.0;
};

namespace detail {

inline double pe_level(const std::vector<double>& levels, int visit) {
  if (visit < 2 || levels.empty()) return 0.0;
  return levels[std::min(static_cast<std::size_t>(visit - 2), levels.size() - 1)];
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Mean outcome at visit j (1-based, t = j - 1 years), including configured
// practice-effect terms.
inline double mean_function(const SimulationConfig& cfg, const SubjectCovariates& s, int visit) {
  const double t = visit - 1;
  const double age = s.age_at_baseline + t;
  double mu = cfg.beta0 + cfg.beta1 * age + cfg.beta2 * s.dx + cfg.beta3 * t * s.dx +
              cfg.beta4[0] * s.educ + cfg.beta4[1] * s.gender + cfg.beta4[2] * s.race_lat;
  mu += detail::pe_level(cfg.pe_beta5, visit);
  mu += detail::pe_level(cfg.pe_beta6_dx, visit) * s.dx;
  mu += detail::pe_level(cfg.pe_beta7_age, visit) * age;
  return mu;
}

// Engine for one subject. Stream rule: subject i of a run with seed s uses
// mt19937_64 seeded with splitmix64(s ^ splitmix64(i)), so every subject's
// draws are independent of generation order.
inline std::mt19937_64 subject_stream(std::uint64_t seed, std::uint64_t subject_index) {
  return std::mt19937_64(detail::splitmix64(seed ^ detail::splitmix64(subject_index)));
}

// Exchangeable Gaussian errors: eps_j = b + e_j with b ~ N(0, rho*sigma2) and
// e_j ~ N(0, (1-rho)*sigma2). Marginal variance sigma2, pairwise correlation rho.
template <class Rng>
Eigen::VectorXd gen_correlated_errors(int n, double sigma2, double rho, Rng& rng) {
  if (n < 1) throw InputError("gen_correlated_errors: length must be >= 1");
  if (!(sigma2 > 0.0)) throw InputError("gen_correlated_errors: sigma2 must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw InputError("gen_correlated_errors: rho must lie in [0, 1)");
  const double b = rho > 0.0 ? std::normal_distribution<double>(0.0, std::sqrt(rho * sigma2))(rng) : 0.0;
  std::normal_distribution<double> own(0.0, std::sqrt((1.0 - rho) * sigma2));
  Eigen::VectorXd eps(n);
  for (int j = 0; j < n; ++j) eps(j) = b + own(rng);
  return eps;
}

template <class Rng>
SubjectCovariates draw_covariates(const CovariateModel& cm, double age_at_baseline, Rng& rng) {
  SubjectCovariates s;
  s.age_at_baseline = age_at_baseline;
  s.dx = std::bernoulli_distribution(cm.p_sz)(rng) ? 1 : 0;
  const double e = std::round(std::normal_distribution<double>(cm.educ_mean, cm.educ_sd)(rng));
  s.educ = std::clamp(e, cm.educ_min, cm.educ_max);
  s.gender = std::bernoulli_distribution(cm.p_gender)(rng) ? 1 : 0;
  s.race_lat = std::bernoulli_distribution(cm.p_race_lat)(rng) ? 1.0 : 0.0;
  return s;
}

// Generates n_per_cohort subjects for every baseline age, each observed at
// t = 0..n_visits-1. Deterministic in cfg.seed.
inline LongitudinalDataset simulate_cohorts(const SimulationConfig& cfg) {
  cfg.validate();
  const std::size_t n_subjects = cfg.cohort_baseline_ages.size() * static_cast<std::size_t>(cfg.n_per_cohort);
  const std::size_t width = std::to_string(n_subjects).size();

  std::vector<VisitRecord> records;
  records.reserve(n_subjects * static_cast<std::size_t>(cfg.n_visits));
  std::size_t index = 0;
  for (double age1 : cfg.cohort_baseline_ages) {
    for (int s = 0; s < cfg.n_per_cohort; ++s, ++index) {
      auto rng = subject_stream(cfg.seed, index);
      const auto cov = draw_covariates(cfg.covariate_model, age1, rng);
      const auto eps = gen_correlated_errors(cfg.n_visits, cfg.sigma2, cfg.rho, rng);

      std::string id = std::to_string(index + 1);
      id = "S" + std::string(width - id.size(), '0') + id;
      for (int j = 1; j <= cfg.n_visits; ++j) {
        VisitRecord r;
        r.subject_id = id;
        r.visit_index = j;
        r.years_since_baseline = j - 1;
        r.age_at_visit = age1 + r.years_since_baseline;
        r.dx = cov.dx;
        r.educ = cov.educ;
        r.gender = cov.gender;
        r.race_lat = cov.race_lat;
        r.outcome = mean_function(cfg, cov, j) + eps(j - 1);
        records.push_back(std::move(r));
      }
    }
  }
  return validate_dataset(std::move(records));
}

}  // namespace pexsim
