#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pexsim/design.hpp"
#include "pexsim/errors.hpp"

namespace pexsim {

// Throws NumericalError naming the columns that are linear combinations of
// the others (pivoted QR order), if any.
inline void require_full_rank(const DesignMatrix& d) {
  if (d.n_obs() < d.n_coef()) {
    throw NumericalError("rank-deficient design: " + std::to_string(d.n_obs()) + " rows for " +
                         std::to_string(d.n_coef()) + " columns");
  }
  // Scale columns so the rank decision does not depend on units.
  Eigen::VectorXd norms = d.x.colwise().norm().transpose();
  Eigen::MatrixXd scaled = d.x;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    if (norms(j) > 0.0) scaled.col(j) /= norms(j);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == d.n_coef()) return;
  std::string names;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < d.n_coef(); ++k) {
    if (!names.empty()) names += ", ";
    names += d.column_labels[static_cast<std::size_t>(perm(k))];
  }
  throw NumericalError("rank-deficient design: dependent column(s): " + names);
}

// Ordinary least squares via pivoted QR.
inline Eigen::VectorXd ols_coefficients(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return x.colPivHouseholderQr().solve(y);
}

// Inverse of a symmetric positive definite matrix; throws when singular.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 1e-14 * ldlt.vectorD().cwiseAbs().maxCoeff()).any()) {
    throw NumericalError(std::string(what) + ": matrix is singular");
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace pexsim
