#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "catparc/bench.hpp"
#include "catparc/distributions.hpp"
#include "catparc/msa.hpp"
#include "catparc/pairwise.hpp"

namespace catparc {

struct MutualInformation {
  double value = 0.0;  // nats
  std::size_t rows_used = 0;
  /// No row had residues at both columns; value is 0.
  bool no_overlap = false;
};

/// MI of the residue pair table at alignment columns i and j. Rows with a
/// gap at either column are skipped; every cell of (residues seen at i) x
/// (residues seen at j) gets `pseudocount` added.
MutualInformation mutual_information(const Alignment& a, std::size_t i, std::size_t j,
                                     double pseudocount = 0.5);

struct PrecisionEstimate {
  Eigen::MatrixXd omega;
  /// Covariance estimate W = omega^-1 from the solver.
  Eigen::MatrixXd covariance;
  std::string method = "glasso";
  double rho = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Largest violation of W - S in rho * subgradient(|omega|).
  double kkt = 0.0;
};

/// Graphical lasso on the covariance S: maximizes
/// log det(Omega) - tr(S Omega) - rho * sum |omega_ab| (diagonal included)
/// by block coordinate descent over columns, each a lasso solved by
/// coordinate descent. Stops when the mean absolute change of W falls below
/// tol times the mean absolute off-diagonal of S.
PrecisionEstimate graphical_lasso(const Eigen::MatrixXd& s, double rho, double tol = 1e-4,
                                  int max_iter = 200);
/// S = X^T X / N of the standardized design.
PrecisionEstimate graphical_lasso(const EncodedMatrix& enc, double rho, double tol = 1e-4,
                                  int max_iter = 200);

/// Max subgradient violation of a candidate precision matrix for S and rho.
double glasso_optimality_gap(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& s, double rho);

/// Sum of |omega| over the (i, j) block of groups.
double psicov_score(const PrecisionEstimate& est, const std::vector<ColumnRange>& groups,
                    std::size_t i, std::size_t j);

/// Entrywise sigma_ab / sqrt(theta_ab) between the columns of two residual
/// blocks, with theta_ab the sample variance of the centered products over N.
struct SelfNormalizedCrossCov {
  Eigen::MatrixXd s_check;
  Eigen::MatrixXd theta;
  /// Entries with theta ~ 0 are set to 0 and marked here.
  std::vector<std::pair<std::size_t, std::size_t>> excluded;
  /// Centered products minus their mean, one column per entry (t1 * d2 + t2).
  Eigen::MatrixXd centered_products;
};
SelfNormalizedCrossCov self_normalized_cross_cov(const Eigen::MatrixXd& e1,
                                                 const Eigen::MatrixXd& e2);

struct L2Result {
  double statistic = 0.0;
  WeightedChiSq weights;
  double p_value = 1.0;
  std::size_t excluded = 0;
  /// (T - mean) / sd of the reference.
  double standardized = 0.0;
};
/// ||S_check||_F^2 against a weighted chi-squared whose weights are the
/// eigenvalues of the estimated correlation matrix of the S_check entries.
L2Result l2_statistic(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2,
                      TailMethod tail = TailMethod::inversion);

struct LinfResult {
  /// max |S_check|^2 - 4 log d2 + log log d2; NaN when d2 = 1.
  double statistic = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  bool missing = true;
  double max_sq = 0.0;
};
/// d2 is the larger of the two block sizes.
LinfResult linf_statistic(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2);

struct BaselineOptions {
  bool mi = true;
  bool psicov = true;
  bool l2 = true;
  bool linf = true;
  double mi_pseudocount = 0.5;
  double glasso_rho = 0.01;
  double glasso_tol = 1e-4;
  int glasso_max_iter = 200;
  unsigned threads = 1;
  TailMethod tail = TailMethod::inversion;
};

/// Ranking rows for every pair of encoded columns, for each enabled method.
/// Methods: "MI", "PSICOV", "L2" (score: standardized statistic), "Linf"
/// (score: statistic). The residual-based statistics use `cache`.
std::vector<RankingRow> baseline_rankings(const Alignment& a, const EncodedMatrix& enc,
                                          const ResidualCache& cache,
                                          const BaselineOptions& options);

/// CATParc rows: score -log p_chisq (computed in log space so strong pairs
/// do not tie at p = 0), p_value p_chisq. Failed pairs are omitted.
std::vector<RankingRow> catparc_rankings(const std::vector<PairResult>& results,
                                         const std::string& method = "CATParc");

}  // namespace catparc
