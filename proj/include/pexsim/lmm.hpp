#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "pexsim/core.hpp"
#include "pexsim/design.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/linalg.hpp"
#include "pexsim/stats.hpp"

namespace pexsim {

inline double icc(double sigma_b2, double sigma_e2) {
  if (sigma_b2 < 0.0 || sigma_e2 < 0.0) throw InputError("icc: negative variance component");
  const double total = sigma_b2 + sigma_e2;
  if (!(total > 0.0)) throw InputError("icc: undefined for zero total variance");
  return sigma_b2 / total;
}

struct LmmFit {
  std::vector<std::string> labels;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd cov;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd test_stats;  // t = estimate / se
  Eigen::VectorXd p_values;    // two-sided, normal approximation
  std::vector<double> df;      // containment degrees of freedom, reported alongside
  double sigma_b2 = 0.0;
  double sigma_e2 = 0.0;
  double icc = 0.0;
  double lambda = 0.0;  // sigma_b2 / sigma_e2
  double reml_loglik = 0.0;
  bool converged = false;
  int n_iter = 0;
  std::size_t n_subjects = 0;
  std::size_t n_obs = 0;
};

// REML log-likelihood of the random-intercept model profiled over beta and
// sigma_e2, as a function of the variance ratio lambda = sigma_b2 / sigma_e2.
//
// With V_i = sigma_e2 (I + lambda 11'), the scaled inverse is
// W_i = I - c_i 11' with c_i = lambda / (1 + n_i lambda), so each evaluation
// only needs per-cluster column sums of X.
class RemlProfile {
 public:
  struct Point {
    double loglik = 0.0;
    Eigen::VectorXd beta;
    double sigma_e2 = 0.0;
    Eigen::MatrixXd xtwx;
  };

  explicit RemlProfile(const DesignMatrix& d) : d_(d) {
    const auto p = d.n_coef();
    const auto m = static_cast<Eigen::Index>(d.clusters.size());
    xtx_ = d.x.transpose() * d.x;
    xty_ = d.x.transpose() * d.y;
    sums_.resize(p, m);
    ysums_.resize(m);
    sizes_.resize(m);
    for (Eigen::Index c = 0; c < m; ++c) {
      const auto r = d.clusters[static_cast<std::size_t>(c)];
      const auto b = static_cast<Eigen::Index>(r.begin);
      const auto n = static_cast<Eigen::Index>(r.size());
      sums_.col(c) = d.x.middleRows(b, n).colwise().sum().transpose();
      ysums_(c) = d.y.segment(b, n).sum();
      sizes_(c) = static_cast<double>(n);
    }
  }

  Point evaluate(double lambda) const {
    const Eigen::VectorXd c = (lambda / (1.0 + sizes_.array() * lambda)).matrix();
    Point pt;
    pt.xtwx = xtx_ - sums_ * c.asDiagonal() * sums_.transpose();
    const Eigen::VectorXd xtwy = xty_ - sums_ * c.cwiseProduct(ysums_);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(pt.xtwx);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw NumericalError("REML: X'V^-1X is not positive definite");
    }
    pt.beta = ldlt.solve(xtwy);

    const Eigen::VectorXd resid = d_.y - d_.x * pt.beta;
    double q = resid.squaredNorm();
    for (std::size_t k = 0; k < d_.clusters.size(); ++k) {
      const auto r = d_.clusters[k];
      const double s = resid.segment(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size())).sum();
      q -= c(static_cast<Eigen::Index>(k)) * s * s;
    }
    const double dof = static_cast<double>(d_.n_obs() - d_.n_coef());
    pt.sigma_e2 = q / dof;
    const double logdet_v = (1.0 + sizes_.array() * lambda).log().sum();
    const double logdet_xtwx = ldlt.vectorD().array().log().sum();
    pt.loglik = -0.5 * (dof * std::log(2.0 * std::numbers::pi * pt.sigma_e2) + dof + logdet_v + logdet_xtwx);
    return pt;
  }

  double loglik(double lambda) const { return evaluate(lambda).loglik; }

 private:
  const DesignMatrix& d_;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  Eigen::MatrixXd sums_;
  Eigen::VectorXd ysums_;
  Eigen::VectorXd sizes_;
};

struct LmmOptions {
  double log_lambda_min = -12.0;
  double log_lambda_max = 12.0;
  int coarse_points = 49;
  std::uintmax_t max_iter = 200;
};

namespace detail {

// Containment degrees of freedom: the intercept and terms that vary within a
// subject get n_obs - n_subjects - p_within, subject-level terms get
// n_subjects - p_between - 1.
inline std::vector<double> containment_df(const DesignMatrix& d) {
  const auto p = d.n_coef();
  std::vector<bool> within(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 1; j < p; ++j) {
    for (const auto& r : d.clusters) {
      const auto b = static_cast<Eigen::Index>(r.begin);
      const auto n = static_cast<Eigen::Index>(r.size());
      const auto col = d.x.col(j).segment(b, n);
      if (col.maxCoeff() - col.minCoeff() > 1e-12) {
        within[static_cast<std::size_t>(j)] = true;
        break;
      }
    }
  }
  const auto p_within = static_cast<double>(std::count(within.begin() + 1, within.end(), true));
  const double p_between = static_cast<double>(p - 1) - p_within;
  const double n_obs = static_cast<double>(d.n_obs());
  const double m = static_cast<double>(d.clusters.size());
  std::vector<double> df(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const bool w = j == 0 || within[static_cast<std::size_t>(j)];
    df[static_cast<std::size_t>(j)] = w ? n_obs - m - p_within : m - p_between - 1.0;
  }
  return df;
}

}  // namespace detail

// Random-intercept LMM by REML. lambda is located by a coarse scan of
// log(lambda) followed by Brent refinement inside the best bracket.
inline LmmFit fit_lmm(const DesignMatrix& d, const LmmOptions& opts = {}) {
  std::size_t multi_visit = 0;
  for (const auto& r : d.clusters) multi_visit += r.size() >= 2 ? 1 : 0;
  if (multi_visit < 2) throw InputError("fit_lmm: need at least two subjects with two or more visits");
  require_full_rank(d);

  const RemlProfile profile(d);
  auto neg = [&](double log_lambda) { return -profile.loglik(std::exp(log_lambda)); };

  const int g = std::max(opts.coarse_points, 3);
  const double step = (opts.log_lambda_max - opts.log_lambda_min) / (g - 1);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g; ++i) {
    const double v = neg(opts.log_lambda_min + step * i);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double lo = opts.log_lambda_min + step * std::max(best - 1, 0);
  const double hi = opts.log_lambda_min + step * std::min(best + 1, g - 1);
  std::uintmax_t iters = opts.max_iter;
  const auto [x_min, f_min] = boost::math::tools::brent_find_minima(neg, lo, hi, 40, iters);
  double log_lambda = x_min;
  if (best_val < f_min) log_lambda = opts.log_lambda_min + step * best;

  LmmFit fit;
  fit.converged = iters < opts.max_iter;
  fit.n_iter = static_cast<int>(iters);
  fit.lambda = std::exp(log_lambda);
  const auto pt = profile.evaluate(fit.lambda);
  fit.labels = d.column_labels;
  fit.coefficients = pt.beta;
  fit.sigma_e2 = pt.sigma_e2;
  fit.sigma_b2 = fit.lambda * pt.sigma_e2;
  fit.icc = icc(fit.sigma_b2, fit.sigma_e2);
  fit.reml_loglik = pt.loglik;
  fit.cov = symmetrize(pt.sigma_e2 * spd_inverse(pt.xtwx, "fit_lmm"));
  fit.std_errors = fit.cov.diagonal().cwiseSqrt();
  fit.test_stats = fit.coefficients.cwiseQuotient(fit.std_errors);
  fit.p_values = fit.test_stats.unaryExpr([](double t) { return normal_two_sided_p(t); });
  fit.df = detail::containment_df(d);
  fit.n_subjects = d.clusters.size();
  fit.n_obs = static_cast<std::size_t>(d.n_obs());
  return fit;
}

inline LmmFit fit_lmm(const LongitudinalDataset& data, const ModelSpec& spec, const LmmOptions& opts = {}) {
  return fit_lmm(build_design(data, spec), opts);
}

}  // namespace pexsim
