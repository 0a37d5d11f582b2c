#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace catparc {

enum class TailMethod { inversion, satterthwaite };

/// Weights of sum_l w_l W_l^2 with W_l i.i.d. standard normal. Weights are
/// kept sorted descending and nonnegative.
class WeightedChiSq {
 public:
  WeightedChiSq() = default;
  /// Sorts descending; throws NumericError on negative or non-finite input.
  explicit WeightedChiSq(std::vector<double> weights);

  /// Builds weights from eigenvalues of an estimated covariance. Values in
  /// (-1e-8 * max, 0) are clamped silently; more negative values are clamped
  /// too and counted in `conditioning_warnings()`.
  static WeightedChiSq from_eigenvalues(const Eigen::VectorXd& values);

  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  std::size_t conditioning_warnings() const { return conditioning_warnings_; }
  double mean() const;
  double variance() const;

 private:
  std::vector<double> weights_;
  std::size_t conditioning_warnings_ = 0;
};

/// P(sum w_l W_l^2 > x) by numerical inversion of the transform of the
/// quadratic form (fixed-Talbot contour); absolute error well below 1e-6.
/// Result clamped to [0, 1]. All-zero weights give 1 for x <= 0, else 0.
double weighted_chisq_tail(const WeightedChiSq& w, double x,
                           TailMethod method = TailMethod::inversion);

/// Two-moment a * chi2_nu approximation (fast path for benchmarking).
double satterthwaite_tail(const WeightedChiSq& w, double x);

/// Smallest x with weighted_chisq_tail(w, x) <= alpha, by bisection.
double weighted_chisq_quantile(const WeightedChiSq& w, double alpha);

/// Upper tail of the central chi-squared with `df` degrees of freedom.
double chisq_tail(double df, double x);
/// log of chisq_tail, accurate far into the tail where the tail underflows.
double log_chisq_tail(double df, double x);

/// Limiting law of the sup-norm statistic: CDF exp(-exp(-x/2)/sqrt(8 pi)).
double gumbel_cdf(double x);
double gumbel_tail(double x);

/// 2 * (1 - Phi(|z|)).
double normal_two_sided(double z);

/// Benjamini-Hochberg adjusted p-values, same order as the input. NaN
/// entries stay NaN and do not count towards the family size.
std::vector<double> benjamini_hochberg(std::span<const double> pvalues);

}  // namespace catparc
