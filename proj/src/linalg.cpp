#include "catparc/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "catparc/error.hpp"

namespace catparc {

SymmetricSpectrum sym_eig(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw NumericError("sym_eig: matrix is not square");
  if (!m.allFinite()) throw NumericError("sym_eig: non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eig: eigensolver failed");
  // Eigen returns ascending order.
  SymmetricSpectrum out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

double default_ridge(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  return 1e-8 * m.trace() / static_cast<double>(m.rows());
}

Eigen::MatrixXd inv_sqrt_sym(const Eigen::MatrixXd& m, double ridge) {
  const auto spec = sym_eig(m);
  if (spec.values.size() == 0) return Eigen::MatrixXd(0, 0);
  const double smallest = spec.values.minCoeff() + ridge;
  if (!(smallest > 1e-12))
    throw SingularityError(fmt::format(
        "inv_sqrt_sym: smallest eigenvalue {:.3g} plus ridge {:.3g} is not positive",
        spec.values.minCoeff(), ridge));
  const Eigen::VectorXd scale = (spec.values.array() + ridge).rsqrt();
  return spec.vectors * scale.asDiagonal() * spec.vectors.transpose();
}

Whitener whiten_sym(const Eigen::MatrixXd& m, double ridge, double rel_tol) {
  const auto spec = sym_eig(m);
  Whitener out;
  const auto d = spec.values.size();
  out.transform = Eigen::MatrixXd::Zero(d, d);
  if (d == 0) return out;
  const double top = spec.values(0);
  if (!(top > 0.0)) return out;
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    if (spec.values(k) > rel_tol * top && spec.values(k) + ridge > 1e-12) {
      scale(k) = 1.0 / std::sqrt(spec.values(k) + ridge);
      out.min_retained = spec.values(k);
      ++out.rank;
    }
  }
  out.transform = spec.vectors * scale.asDiagonal() * spec.vectors.transpose();
  return out;
}

}  // namespace catparc
