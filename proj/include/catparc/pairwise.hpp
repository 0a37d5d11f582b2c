#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "catparc/distributions.hpp"
#include "catparc/group_lasso.hpp"
#include "catparc/msa.hpp"

namespace catparc {

/// Which p-value orders the pair table.
enum class PValueKind { chisq, weighted };

struct PairwiseOptions {
  GroupPenaltySpec penalty;
  FitOptions fit;
  /// Compute p_weighted (Cov(Q) spectrum plus tail inversion) for every pair.
  bool weighted = false;
  PValueKind rank_by = PValueKind::chisq;
  TailMethod tail = TailMethod::inversion;
  unsigned threads = 1;
};

/// One-vs-rest regressions of every group on all other groups. Indices are
/// group indices of the EncodedMatrix the cache was built from.
struct ResidualCache {
  std::shared_ptr<const GramDesign> design;
  GroupPenaltySpec penalty;
  FitOptions fit_options;
  /// fits[i].coef has one row per design column (zero on group i).
  std::vector<FitResult> fits;
  /// Empty when the fit for that group succeeded.
  std::vector<std::string> failures;

  std::size_t num_groups() const { return fits.size(); }
  bool ok(std::size_t i) const { return failures[i].empty(); }
};

ResidualCache one_vs_rest_all(const EncodedMatrix& enc, const GroupPenaltySpec& spec,
                              const FitOptions& fit = {}, unsigned threads = 1);

/// Picks C by K-fold cross-validation (held-out squared error) on a random
/// subset of one-vs-rest regressions and returns the median choice. A stays
/// fixed.
struct TuneOptions {
  std::vector<double> grid{0.03, 0.05, 0.07, 0.1, 0.14, 0.2};
  /// Share of positions used as responses; at least one is always used.
  double fraction = 0.1;
  std::size_t folds = 5;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};
struct TuneResult {
  double c = 0.07;
  std::vector<std::size_t> responses;
  std::vector<double> chosen;
};
TuneResult tune_c(const EncodedMatrix& enc, const GroupPenaltySpec& spec,
                  const TuneOptions& options, const FitOptions& fit = {});

struct PairResiduals {
  Eigen::MatrixXd e_i;
  Eigen::MatrixXd e_j;
  bool refit_i = false;
  bool refit_j = false;
  bool converged = true;
};

/// Residuals of groups i and j with both groups removed from the predictor
/// set. The one-vs-rest residuals are reused on a side whose fit put zero
/// weight on the other group; otherwise that side is refit without it,
/// warm-started from the one-vs-rest coefficients.
PairResiduals pair_residuals(const ResidualCache& cache, const EncodedMatrix& enc,
                             std::size_t i, std::size_t j);

struct WilksResult {
  /// Squared sample canonical correlations, descending, length min(d1, d2).
  Eigen::VectorXd r2;
  double statistic = 0.0;
  Eigen::MatrixXd s12;
  /// Rank-aware S11^(-1/2) and S22^(-1/2).
  Eigen::MatrixXd whiten_1;
  Eigen::MatrixXd whiten_2;
  std::size_t rank_1 = 0;
  std::size_t rank_2 = 0;
  /// Some r^2 reached 1 and was clamped to 1 - 1e-12.
  bool clamped = false;
  /// A retained direction of S11 or S22 is nearly singular.
  bool ill_conditioned = false;
};

/// S = E^T E / N over the stacked residuals, r^2 the eigenvalues of
/// S11^-1 S12 S22^-1 S21 and T = -N sum log(1 - r^2). Residual directions
/// with zero variance (a position without gaps has one) are projected out
/// rather than inverted.
WilksResult wilks_pair(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2);

/// Fourth-moment estimate of Cov(Q): with Y1 = E1 W1 and Y2 = E2 W2, entry
/// ((t1, t2), (u1, u2)) is N^-1 sum_k Y1[k,t1] Y2[k,t2] Y1[k,u1] Y2[k,u2].
/// Index (t1, t2) maps to t1 * d2 + t2.
Eigen::MatrixXd cov_q_hat(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2,
                          const Eigen::MatrixXd& whiten_1, const Eigen::MatrixXd& whiten_2);

struct PairPValues {
  double p_weighted = 1.0;
  double p_chisq = 1.0;
};
PairPValues pair_pvalue(double statistic, const WeightedChiSq& weights, double df,
                        TailMethod tail = TailMethod::inversion);

struct PairResult {
  /// Group indices, ordered so that d_i <= d_j (ties: i < j).
  std::size_t i = 0, j = 0;
  /// Alignment columns of the two groups.
  std::size_t position_i = 0, position_j = 0;
  std::size_t d_i = 0, d_j = 0;
  Eigen::VectorXd r2;
  double statistic = 0.0;
  /// rank_i * rank_j; equals d_i * d_j unless a residual block is singular.
  double df = 0.0;
  WeightedChiSq weights;
  double p_weighted = std::numeric_limits<double>::quiet_NaN();
  double p_chisq = 1.0;
  double bh_adj_p = std::numeric_limits<double>::quiet_NaN();
  bool refit_i = false, refit_j = false;
  bool unstable = false;
  bool failed = false;
  std::string error;

  double pvalue(PValueKind kind) const {
    return kind == PValueKind::weighted ? p_weighted : p_chisq;
  }
};

PairResult test_pair(const ResidualCache& cache, const EncodedMatrix& enc, std::size_t i,
                     std::size_t j, const PairwiseOptions& options);

/// Every pair of groups, sorted, with the BH column filled in.
std::vector<PairResult> test_all_pairs(const EncodedMatrix& enc, const PairwiseOptions& options);
std::vector<PairResult> test_all_pairs(const ResidualCache& cache, const EncodedMatrix& enc,
                                       const PairwiseOptions& options);

/// p ascending, T descending, then (position_i, position_j); failed pairs last.
void sort_pair_results(std::vector<PairResult>& results, PValueKind rank_by);
void fill_bh(std::vector<PairResult>& results, PValueKind rank_by);

/// Edges (alignment columns, smaller first) with T >= K log m.
std::vector<std::pair<std::size_t, std::size_t>> recover_graph(
    const std::vector<PairResult>& results, double k, std::size_t m);

/// Writes successful pairs with 1-based alignment columns.
void write_pair_tsv(std::ostream& out, const std::vector<PairResult>& results);

}  // namespace catparc
