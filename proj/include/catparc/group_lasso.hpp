#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "catparc/msa.hpp"

namespace catparc {

/// Constants of the penalty level
///   lambda_g = C * (sqrt(d_g * d_resp / N) + sqrt(A * log(g) / N)).
struct GroupPenaltySpec {
  double A = 2.0;
  double C = 0.07;
};

/// One lambda per predictor group; `num_groups` is g in the formula and
/// defaults to group_sizes.size().
std::vector<double> lambda_schedule(std::span<const std::size_t> group_sizes,
                                    std::size_t d_resp, std::size_t n,
                                    const GroupPenaltySpec& spec,
                                    std::size_t num_groups = 0);

struct FitOptions {
  double tol = 1e-6;
  int max_iter = 1000;
};

/// Rows of `coef` follow the columns of the design the fit was run on. For
/// fits over a subset of groups the rows of excluded groups are zero.
struct FitResult {
  Eigen::MatrixXd coef;
  Eigen::MatrixXd residuals;
  /// Indices (into the design's group list) of blocks with nonzero norm.
  std::vector<std::size_t> active_groups;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Largest KKT violation measured at exit, in Gram space.
  double kkt = 0.0;
  /// Blocks whose Gram matrix was singular and solved with a ridge.
  std::size_t ridge_blocks = 0;

  bool is_active(std::size_t group) const;
};

/// Gram matrix X^T X / N of a standardized design together with the
/// eigen-decomposition of every diagonal block. Shared by all regressions
/// run on the same design.
class GramDesign {
 public:
  GramDesign(const Eigen::MatrixXd& x, std::vector<ColumnRange> groups);

  const Eigen::MatrixXd& gram() const { return gram_; }
  const std::vector<ColumnRange>& groups() const { return groups_; }
  std::size_t num_rows() const { return n_; }
  std::size_t num_columns() const { return static_cast<std::size_t>(gram_.rows()); }

  struct BlockSpectrum {
    Eigen::VectorXd values;  // descending, clamped at 0
    Eigen::MatrixXd vectors;
    /// Added to `values` in penalized block solves of a singular block.
    double ridge = 0.0;
  };
  const BlockSpectrum& spectrum(std::size_t g) const { return spectra_[g]; }

 private:
  Eigen::MatrixXd gram_;
  std::vector<ColumnRange> groups_;
  std::vector<BlockSpectrum> spectra_;
  std::size_t n_ = 0;
};

/// Block coordinate descent for
///   (1/2) tr(B^T G B) - tr(B^T C) + (1/2) yy + sum_g lambda_g ||B_g||_F
/// over the listed predictor groups, which is the group Lasso objective
/// (1/2N)||Y - X B||^2 + sum lambda_g ||B_g|| written with G = X^T X / N,
/// C = X^T Y / N and yy = tr(Y^T Y) / N. `lambdas` is indexed like
/// `predictors`. `warm` (same shape as the result) seeds the iteration.
/// Residuals are left empty.
FitResult fit_group_lasso_gram(const GramDesign& design, const Eigen::MatrixXd& cross,
                               double yy, std::span<const std::size_t> predictors,
                               std::span<const double> lambdas, const FitOptions& options,
                               const Eigen::MatrixXd* warm = nullptr);

/// Multivariate group Lasso of Y on the standardized predictors Xp. The
/// residual matrix is recomputed as Y - Xp B after convergence. A fit that
/// hits max_iter comes back with converged == false.
FitResult fit_multivariate_group_lasso(const Eigen::MatrixXd& y, const Eigen::MatrixXd& xp,
                                       const std::vector<ColumnRange>& groups,
                                       std::span<const double> lambdas,
                                       const FitOptions& options = {});

/// Largest violation of the optimality conditions, using the fit's
/// residuals: ||X_g^T E / N - lambda_g B_g / ||B_g|| || on active blocks and
/// max(0, ||X_g^T E / N|| - lambda_g) on the others.
double kkt_check(const FitResult& fit, const Eigen::MatrixXd& y, const Eigen::MatrixXd& xp,
                 const std::vector<ColumnRange>& groups, std::span<const double> lambdas);

}  // namespace catparc
