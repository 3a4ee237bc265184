#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pexsim/core.hpp"
#include "pexsim/design.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/format.hpp"
#include "pexsim/linalg.hpp"
#include "pexsim/stats.hpp"

namespace pexsim {

enum class WorkingCorrelation { Independence, Exchangeable };

// Working correlation actually used for a fit: exchangeable with `rho`, or
// independence (rho ignored).
struct WorkingStructure {
  WorkingCorrelation type = WorkingCorrelation::Exchangeable;
  double rho = 0.0;
};

struct GeeFit {
  std::vector<std::string> labels;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd naive_cov;
  Eigen::MatrixXd robust_cov;
  Eigen::VectorXd robust_se;
  Eigen::VectorXd wald_stats;
  Eigen::VectorXd p_values;
  WorkingCorrelation working = WorkingCorrelation::Exchangeable;
  double working_rho = 0.0;
  double dispersion = 0.0;
  std::size_t n_clusters = 0;
  std::size_t n_obs = 0;
  int n_iter = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct GeeOptions {
  double tolerance = 1e-10;
  int max_iter = 100;
};

// Exchangeable moment estimator on Pearson residuals already divided by sqrt(phi):
//   rho = sum_i sum_{j<k} r_ij r_ik / (sum_i n_i (n_i - 1) / 2 - p).
inline double estimate_rho_moment(const Eigen::VectorXd& std_resid, std::span<const ClusterRange> clusters, int p) {
  double num = 0.0;
  double pairs = 0.0;
  for (const auto& r : clusters) {
    const auto seg = std_resid.segment(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size()));
    const double s = seg.sum();
    num += 0.5 * (s * s - seg.squaredNorm());
    const double n = static_cast<double>(r.size());
    pairs += 0.5 * n * (n - 1.0);
  }
  const double denom = pairs - p;
  if (!(denom > 0.0)) throw NumericalError("estimate_rho_moment: no within-cluster pairs beyond p");
  return num / denom;
}

struct ClampedRho {
  double value = 0.0;
  bool clamped = false;
};

// Restricts rho to the open interval where every exchangeable block is
// positive definite: (-1/(max_cluster_size - 1), 1).
inline ClampedRho clamp_rho(double rho, std::size_t max_cluster_size) {
  constexpr double margin = 1e-6;
  const double upper = 1.0 - margin;
  const double lower = max_cluster_size > 1 ? -1.0 / static_cast<double>(max_cluster_size - 1) + margin : -upper;
  if (rho > upper) return {upper, true};
  if (rho < lower) return {lower, true};
  return {rho, false};
}

namespace detail {

// R^{-1} for an n x n exchangeable block is a I + b 11'; returns (a, b).
inline std::pair<double, double> exchangeable_inverse(const WorkingStructure& w, std::size_t n) {
  if (w.type == WorkingCorrelation::Independence || n == 1) return {1.0, 0.0};
  const double rho = w.rho;
  const double a = 1.0 / (1.0 - rho);
  const double b = -a * rho / (1.0 + (static_cast<double>(n) - 1.0) * rho);
  return {a, b};
}

struct NormalEquations {
  Eigen::MatrixXd lhs;  // sum X_i' R_i^-1 X_i
  Eigen::VectorXd rhs;  // sum X_i' R_i^-1 y_i
};

inline NormalEquations weighted_normal_equations(const DesignMatrix& d, const WorkingStructure& w) {
  if (w.type == WorkingCorrelation::Independence) {
    return {d.x.transpose() * d.x, d.x.transpose() * d.y};
  }
  const auto p = d.n_coef();
  NormalEquations out{Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p)};
  for (const auto& r : d.clusters) {
    const auto b0 = static_cast<Eigen::Index>(r.begin);
    const auto n = static_cast<Eigen::Index>(r.size());
    const auto rows = d.x.middleRows(b0, n);
    const auto ys = d.y.segment(b0, n);
    const auto [a, b] = exchangeable_inverse(w, r.size());
    const Eigen::VectorXd s = rows.colwise().sum().transpose();
    out.lhs.noalias() += a * rows.transpose() * rows;
    out.lhs.noalias() += b * s * s.transpose();
    out.rhs.noalias() += a * rows.transpose() * ys;
    out.rhs += (b * ys.sum()) * s;
  }
  return out;
}

}  // namespace detail

// Cluster-robust covariance B^-1 M B^-1 with
//   B = sum X_i' V_i^-1 X_i,  M = sum X_i' V_i^-1 r_i r_i' V_i^-1 X_i,  V_i = phi R_i.
inline Eigen::MatrixXd sandwich_cov(const DesignMatrix& d, const Eigen::VectorXd& residuals,
                                    const WorkingStructure& w, double phi) {
  if (!(phi > 0.0)) throw NumericalError("sandwich_cov: dispersion must be positive");
  const auto p = d.n_coef();
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const auto& r : d.clusters) {
    const auto b0 = static_cast<Eigen::Index>(r.begin);
    const auto n = static_cast<Eigen::Index>(r.size());
    const auto rows = d.x.middleRows(b0, n);
    const auto [a, b] = detail::exchangeable_inverse(w, r.size());
    // V_i^-1 X_i and V_i^-1 r_i without forming V_i.
    Eigen::MatrixXd vinv_x = a * rows;
    vinv_x.rowwise() += b * rows.colwise().sum();
    vinv_x /= phi;
    const auto res = residuals.segment(b0, n);
    const Eigen::VectorXd vinv_r = (a * res.array() + b * res.sum()).matrix() / phi;
    bread.noalias() += rows.transpose() * vinv_x;
    const Eigen::VectorXd u = rows.transpose() * vinv_r;
    meat.noalias() += u * u.transpose();
  }
  const Eigen::MatrixXd binv = spd_inverse(symmetrize(bread), "sandwich_cov");
  return symmetrize(binv * meat * binv);
}

// Marginal linear model by GEE (identity link, Gaussian variance).
//
// Starts from OLS, then alternates moment updates of phi and rho on Pearson
// residuals with a GLS update of beta under the working correlation, until
// every |delta beta_k| <= tol * (1 + |beta_k|).
inline GeeFit fit_gee(const DesignMatrix& d, WorkingCorrelation working, const GeeOptions& opts = {}) {
  if (d.clusters.size() < 2) throw InputError("fit_gee: need at least two clusters");
  require_full_rank(d);

  const auto p = d.n_coef();
  const double n_obs = static_cast<double>(d.n_obs());
  std::size_t max_size = 0;
  for (const auto& r : d.clusters) max_size = std::max(max_size, r.size());

  GeeFit fit;
  fit.labels = d.column_labels;
  fit.working = working;
  fit.n_clusters = d.clusters.size();
  fit.n_obs = static_cast<std::size_t>(d.n_obs());

  Eigen::VectorXd beta = ols_coefficients(d.x, d.y);
  WorkingStructure w{working, 0.0};
  auto dispersion = [&](const Eigen::VectorXd& resid) { return resid.squaredNorm() / (n_obs - static_cast<double>(p)); };

  bool clamp_warned = false;
  if (working == WorkingCorrelation::Independence) {
    fit.converged = true;
  } else {
    for (int it = 1; it <= opts.max_iter; ++it) {
      const Eigen::VectorXd resid = d.y - d.x * beta;
      const double phi = dispersion(resid);
      const double raw = estimate_rho_moment(resid / std::sqrt(phi), d.clusters, static_cast<int>(p));
      const auto clamped = clamp_rho(raw, max_size);
      if (clamped.clamped && !clamp_warned) {
        fit.warnings.push_back("working correlation " + format_roundtrip(raw) + " clamped to " +
                               format_roundtrip(clamped.value));
        clamp_warned = true;
      }
      w.rho = clamped.value;
      const auto ne = detail::weighted_normal_equations(d, w);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(ne.lhs);
      if (ldlt.info() != Eigen::Success) throw NumericalError("fit_gee: singular weighted normal equations");
      const Eigen::VectorXd next = ldlt.solve(ne.rhs);
      const double change = ((next - beta).array().abs() / (1.0 + next.array().abs())).maxCoeff();
      beta = next;
      fit.n_iter = it;
      if (change <= opts.tolerance) {
        fit.converged = true;
        break;
      }
    }
  }
  if (!fit.converged) fit.warnings.push_back("GEE did not converge in " + std::to_string(opts.max_iter) + " iterations");

  const Eigen::VectorXd resid = d.y - d.x * beta;
  fit.coefficients = beta;
  fit.dispersion = dispersion(resid);
  fit.working_rho = w.rho;
  const auto ne = detail::weighted_normal_equations(d, w);
  fit.naive_cov = symmetrize(fit.dispersion * spd_inverse(ne.lhs, "fit_gee"));
  fit.robust_cov = sandwich_cov(d, resid, w, fit.dispersion);
  fit.robust_se = fit.robust_cov.diagonal().cwiseSqrt();
  fit.wald_stats.resize(p);
  fit.p_values.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto wt = wald_test(beta(j), fit.robust_se(j));
    fit.wald_stats(j) = wt.stat;
    fit.p_values(j) = wt.p;
  }
  return fit;
}

inline GeeFit fit_gee(const LongitudinalDataset& data, const ModelSpec& spec,
                      WorkingCorrelation working = WorkingCorrelation::Exchangeable, const GeeOptions& opts = {}) {
  return fit_gee(build_design(data, spec), working, opts);
}

}  // namespace pexsim
