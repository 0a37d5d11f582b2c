#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace catparc {

/// Eigen-decomposition of a symmetric matrix with eigenvalues in descending
/// order; column k of `vectors` pairs with `values(k)`.
struct SymmetricSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// Symmetrizes (M + M^T)/2 first. Throws NumericError on non-finite input.
SymmetricSpectrum sym_eig(const Eigen::MatrixXd& m);

/// 1e-8 * trace(M) / dim.
double default_ridge(const Eigen::MatrixXd& m);

/// V diag((lambda + ridge)^(-1/2)) V^T. Throws SingularityError when
/// lambda_min + ridge <= 1e-12.
Eigen::MatrixXd inv_sqrt_sym(const Eigen::MatrixXd& m, double ridge);

/// Rank-aware inverse square root: eigen-directions with
/// lambda <= rel_tol * lambda_max are treated as exact null directions and
/// mapped to zero; the rest get (lambda + ridge)^(-1/2).
struct Whitener {
  Eigen::MatrixXd transform;
  std::size_t rank = 0;
  double min_retained = 0.0;
};
Whitener whiten_sym(const Eigen::MatrixXd& m, double ridge, double rel_tol = 1e-9);

}  // namespace catparc
