#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catparc/simulate.hpp"

namespace catparc {

/// One scored pair in the common ranking format shared by every method.
/// Larger scores mean stronger evidence of coupling. Columns are 0-based.
struct RankingRow {
  std::string method;
  std::size_t i = 0, j = 0;
  double score = 0.0;
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

/// `method i j score p_value` with 1-based columns; NA for a missing value.
void write_rankings_tsv(std::ostream& out, const std::vector<RankingRow>& rows);
std::vector<RankingRow> read_rankings_tsv(std::istream& in);

struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

/// Sweeps the threshold down through the distinct scores (ties enter
/// together). `higher_is_positive` false flips the score direction. Throws
/// InputError unless both classes are present.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels,
                   bool higher_is_positive = true);
/// Trapezoidal area under (fpr, tpr).
double auc(const RocCurve& curve);

struct Rates {
  double type1 = 0.0;
  double power = 0.0;
};
/// Fractions of null / alternative pairs with p < alpha. NaN p-values are
/// skipped.
Rates rate_at_level(const std::vector<double>& pvalues, const std::vector<bool>& labels,
                    double alpha);

/// Joins rankings with truth by pair; pairs missing from the ranking are
/// scored -inf (ranked last), pairs missing from the truth are ignored.
struct Scored {
  std::vector<double> scores;
  std::vector<double> pvalues;
  std::vector<bool> labels;
};
Scored join_truth(const std::vector<RankingRow>& rows, const std::vector<TruthPair>& truth);

/// Median of each field over replicates: ROC curves are resampled on a
/// common FPR grid and the median TPR is taken pointwise.
struct MethodSummary {
  double auc = 0.0;
  double type1 = 0.0;
  double power = 0.0;
  std::size_t replicates = 0;
};
struct ReplicateMetrics {
  double auc = 0.0;
  Rates rates;
  RocCurve roc;
};
MethodSummary median_summary(const std::vector<ReplicateMetrics>& reps);
RocCurve median_roc(const std::vector<RocCurve>& curves, std::size_t grid = 101);

double median(std::vector<double> values);

/// Per-method evaluation of one replicate.
std::map<std::string, ReplicateMetrics> evaluate_rankings(const std::vector<RankingRow>& rows,
                                                          const std::vector<TruthPair>& truth,
                                                          double alpha);

void write_roc_tsv(std::ostream& out, const std::map<std::string, RocCurve>& curves);
nlohmann::json summary_json(const std::map<std::string, MethodSummary>& summary);

}  // namespace catparc
