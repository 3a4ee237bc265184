#pragma once

// Slow, direct reference computations used only by the tests.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "pexsim/core.hpp"
#include "pexsim/design.hpp"
#include "pexsim/simulate.hpp"

namespace oracle {

// P(X > x) for X ~ chi2(1), by exp-sinh quadrature of the density on [x, inf).
inline double chi2_1_tail(double x) {
  if (x <= 0.0) return 1.0;
  const auto density = [](double t) {
    return std::exp(-0.5 * t) / std::sqrt(2.0 * std::numbers::pi * t);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(density, x, std::numeric_limits<double>::infinity(), 1e-15);
}

// Restricted log-likelihood profiled over beta and sigma_e2, built from the
// explicit per-cluster matrices V_i = I + lambda 11' (no inversion shortcut).
inline double reml_loglik_dense(const pexsim::DesignMatrix& d, double lambda) {
  const auto p = d.n_coef();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  double logdet_v = 0.0;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
  for (const auto& r : d.clusters) {
    const auto n = static_cast<Eigen::Index>(r.size());
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) + lambda * Eigen::MatrixXd::Ones(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    const Eigen::MatrixXd l = llt.matrixL();
    logdet_v += 2.0 * l.diagonal().array().log().sum();
    const auto xi = d.x.middleRows(static_cast<Eigen::Index>(r.begin), n);
    const auto yi = d.y.segment(static_cast<Eigen::Index>(r.begin), n);
    a += xi.transpose() * llt.solve(Eigen::MatrixXd(xi));
    g += xi.transpose() * llt.solve(Eigen::VectorXd(yi));
    factors.push_back(std::move(llt));
  }
  Eigen::LLT<Eigen::MatrixXd> allt(a);
  const Eigen::VectorXd beta = allt.solve(g);
  double q = 0.0;
  for (std::size_t k = 0; k < d.clusters.size(); ++k) {
    const auto r = d.clusters[k];
    const auto n = static_cast<Eigen::Index>(r.size());
    const Eigen::VectorXd ri =
        d.y.segment(static_cast<Eigen::Index>(r.begin), n) - d.x.middleRows(static_cast<Eigen::Index>(r.begin), n) * beta;
    q += ri.dot(factors[k].solve(ri));
  }
  const double dof = static_cast<double>(d.n_obs() - p);
  const double s2 = q / dof;
  const Eigen::MatrixXd la = allt.matrixL();
  const double logdet_a = 2.0 * la.diagonal().array().log().sum();
  return -0.5 * (dof * std::log(2.0 * std::numbers::pi * s2) + dof + logdet_v + logdet_a);
}

// Ordinary least squares through the normal equations.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return (x.transpose() * x).llt().solve(x.transpose() * y);
}

// White's HC0 covariance (X'X)^-1 X' diag(r^2) X (X'X)^-1.
inline Eigen::MatrixXd hc0(const Eigen::MatrixXd& x, const Eigen::VectorXd& r) {
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  const Eigen::MatrixXd meat = x.transpose() * r.array().square().matrix().asDiagonal() * x;
  return xtx_inv * meat * xtx_inv;
}

// Small balanced no-PE dataset for fast fits.
inline pexsim::LongitudinalDataset small_no_pe(int n_per_cohort, std::uint64_t seed) {
  auto cfg = pexsim::SimulationConfig::no_pe();
  cfg.n_per_cohort = n_per_cohort;
  cfg.seed = seed;
  return pexsim::simulate_cohorts(cfg);
}

}  // namespace oracle
