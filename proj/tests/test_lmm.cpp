#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pexsim/lmm.hpp"

using namespace pexsim;

namespace {

// Balanced clusters with two covariates; outcome = X b + u_i + e_ij.
DesignMatrix clustered(int m, int n, double sigma_b, double sigma_e, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<> z;
  Eigen::MatrixXd x(m * n, 3);
  Eigen::VectorXd y(m * n);
  std::vector<std::size_t> cl(static_cast<std::size_t>(m * n));
  for (int i = 0; i < m; ++i) {
    const double u = sigma_b * z(rng);
    const double between = z(rng);
    for (int j = 0; j < n; ++j) {
      const int r = i * n + j;
      x(r, 0) = 1.0;
      x(r, 1) = j;
      x(r, 2) = between;
      y(r) = 0.5 + 0.1 * j - 0.3 * between + u + sigma_e * z(rng);
      cl[static_cast<std::size_t>(r)] = static_cast<std::size_t>(i);
    }
  }
  return make_design({"(Intercept)", "t", "w"}, x, y, cl);
}

}  // namespace

TEST(Icc, Examples) {
  EXPECT_EQ(icc(0, 1), 0.0);
  EXPECT_EQ(icc(3, 1), 0.75);
  for (double k : {1e-6, 1.0, 3.7, 1e6}) EXPECT_NEAR(icc(0.753 * k, 0.247 * k), 0.753, 1e-12);
  EXPECT_THROW(icc(0, 0), InputError);
  EXPECT_THROW(icc(-1, 1), InputError);
}

TEST(RemlProfile, MatchesDenseOracle) {
  const auto d = clustered(30, 4, 0.7, 1.0, 3);
  const RemlProfile prof(d);
  for (double lambda : {0.0, 1e-4, 0.1, 0.49, 1.0, 3.0, 50.0}) {
    EXPECT_NEAR(prof.loglik(lambda), oracle::reml_loglik_dense(d, lambda), 1e-8) << "lambda " << lambda;
  }
}

TEST(RemlProfile, ZeroLambdaIsOls) {
  const auto d = clustered(40, 5, 1.0, 1.0, 4);
  const auto pt = RemlProfile(d).evaluate(0.0);
  EXPECT_LT((pt.beta - oracle::ols(d.x, d.y)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitLmm, OptimumBeatsBruteForceGrid) {
  const auto d = clustered(50, 6, 0.8, 0.5, 5);
  const auto fit = fit_lmm(d);
  ASSERT_TRUE(fit.converged);
  // 2001-point grid on lambda in [0, 20].
  double best = -HUGE_VAL, best_lambda = 0.0;
  const double step = 0.01;
  for (int i = 0; i <= 2000; ++i) {
    const double ll = oracle::reml_loglik_dense(d, step * i);
    if (ll > best) {
      best = ll;
      best_lambda = step * i;
    }
  }
  EXPECT_NEAR(fit.reml_loglik, best, 1e-4);
  EXPECT_GE(fit.reml_loglik, best - 1e-9);
  EXPECT_NEAR(fit.lambda, best_lambda, step);
  EXPECT_NEAR(fit.icc, fit.sigma_b2 / (fit.sigma_b2 + fit.sigma_e2), 0.0);
}

TEST(FitLmm, NoClusteringLimit) {
  const auto d = clustered(200, 6, 0.0, 1.0, 6);
  const auto fit = fit_lmm(d);
  EXPECT_LT(fit.icc, 0.05);
  EXPECT_LT((fit.coefficients - oracle::ols(d.x, d.y)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitLmm, PerfectClusteringLimit) {
  const auto d = clustered(50, 6, 1.0, 1e-4, 7);
  EXPECT_GT(fit_lmm(d).icc, 0.99);
}

TEST(FitLmm, ScaleInvariance) {
  auto d = clustered(60, 5, 0.6, 0.4, 8);
  const auto base = fit_lmm(d);
  d.y *= 7.5;
  const auto scaled = fit_lmm(d);
  EXPECT_NEAR(scaled.icc, base.icc, 1e-6);
  EXPECT_LT((scaled.coefficients - 7.5 * base.coefficients).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(scaled.sigma_e2 / base.sigma_e2, 7.5 * 7.5, 1e-4);
}

TEST(FitLmm, SimulatedRecovery) {
  const auto fit = fit_lmm(oracle::small_no_pe(100, 1), ModelSpec::preset("no-pe"));
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.icc, 0.753, 0.05);
  const auto k = static_cast<Eigen::Index>(std::find(fit.labels.begin(), fit.labels.end(), "dx_bin") - fit.labels.begin());
  EXPECT_NEAR(fit.coefficients(k), -0.782, 0.06);
  EXPECT_EQ(fit.n_subjects, 500u);
  EXPECT_EQ(fit.n_obs, 3000u);
  // Containment DF: intercept, age_visit and dx_bin:t vary within subject.
  EXPECT_EQ(fit.df[0], 3000 - 500 - 2);
  EXPECT_EQ(fit.df[static_cast<std::size_t>(k)], 500 - 4 - 1);
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    EXPECT_NEAR(fit.test_stats(j), fit.coefficients(j) / fit.std_errors(j), 1e-12);
    EXPECT_GE(fit.p_values(j), 0.0);
    EXPECT_LE(fit.p_values(j), 1.0);
  }
}

TEST(FitLmm, Errors) {
  auto d = clustered(10, 3, 0.5, 0.5, 9);
  d.x.col(2) = 2.0 * d.x.col(1);
  try {
    fit_lmm(d);
    FAIL() << "expected rank error";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(msg.find("t") != std::string::npos || msg.find("w") != std::string::npos) << msg;
    EXPECT_NE(msg.find("dependent"), std::string::npos) << msg;
  }
  // Only one multi-visit subject.
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  EXPECT_THROW(fit_lmm(make_design({"(Intercept)"}, x, y, {0, 0, 1, 2})), InputError);
}
