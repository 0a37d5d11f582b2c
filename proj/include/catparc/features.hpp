#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "catparc/baselines.hpp"
#include "catparc/msa.hpp"
#include "catparc/pairwise.hpp"

namespace catparc {

/// Coupling matrix C_ab for every pair of encoded groups a < b, rows over
/// the residues of a and columns over those of b. Absent blocks (screened
/// out or failed) contribute 0.
struct PartialCovMap {
  std::string method = "partial_cov";
  std::size_t alignment_length = 0;
  std::vector<std::size_t> positions;
  std::vector<std::string> residues;
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<char> present;
  /// Pairs whose residuals could not be computed.
  std::size_t failed_pairs = 0;
  /// Pairs left out by the screen.
  std::size_t screened_pairs = 0;
  /// residue_index[g][c]: column of residue c in group g, or -1.
  std::vector<std::array<int, 256>> residue_index;
  /// marginal[g](c) = sum over b != g of the row sums C_gb(c, .).
  std::vector<Eigen::VectorXd> marginal;
  /// group_of_position[p]: group of alignment column p, or npos.
  std::vector<std::size_t> group_of_position;

  std::size_t num_groups() const { return positions.size(); }
  std::size_t pair_index(std::size_t a, std::size_t b) const;
  bool has(std::size_t a, std::size_t b) const;
  /// C_ab(x, y) with residue indices x of a and y of b, any order of a and b.
  double value(std::size_t a, std::size_t b, int x, int y) const;
  /// C_ab as a d_a x d_b matrix, zero if absent.
  Eigen::MatrixXd matrix(std::size_t a, std::size_t b) const;
};

/// Group pairs (smaller index first) to keep, usually from a p-value screen.
using PairScreen = std::vector<std::pair<std::size_t, std::size_t>>;
PairScreen screen_pairs(const std::vector<PairResult>& results, double alpha, PValueKind kind);

/// C_ab = E_a^T E_b / N from the pair residuals; all pairs unless `screen`.
PartialCovMap partial_cov_map(const ResidualCache& cache, const EncodedMatrix& enc,
                              const std::optional<PairScreen>& screen = std::nullopt,
                              unsigned threads = 1);

/// Same layout with C_ab replaced by the (a, b) block of a precision estimate.
PartialCovMap precision_map(const PrecisionEstimate& est, const EncodedMatrix& enc,
                            const std::optional<PairScreen>& screen = std::nullopt);

/// Fills residue_index, marginal and group_of_position from the blocks.
void index_map(PartialCovMap& map);

struct SequenceScores {
  double c = 0.0;
  double m = 0.0;
  /// Non-gap residues at encoded columns that the encoding never saw.
  std::size_t unseen = 0;
};

/// C(a) = sum_{a<b} C_ab(s_a, s_b), M(a) = sum_g marginal[g](s_g). The
/// sequence covers the whole alignment; columns that were dropped from the
/// encoding are ignored. Throws InputError on a length mismatch.
SequenceScores sequence_scores(const std::string& sequence, const PartialCovMap& map);

struct Mutant {
  std::string id;
  std::string sequence;
  std::optional<double> effect;
};

struct FeatureRow {
  std::string id;
  double delta_c = 0.0;
  double delta_m = 0.0;
  std::size_t n_mutations = 0;
  std::size_t unseen_count = 0;
};

/// Differences to the wild type, summed only over terms touching the
/// mutated columns.
FeatureRow delta_feature(const Mutant& mutant, const std::string& wildtype,
                         const PartialCovMap& map);
std::vector<FeatureRow> delta_features(const std::vector<Mutant>& mutants,
                                       const std::string& wildtype, const PartialCovMap& map,
                                       unsigned threads = 1);

/// Rank correlation with average ranks for ties. NaN if either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// `id,sequence[,effect]`, optional header line starting with `id,`.
std::vector<Mutant> read_mutants_csv(std::istream& in);
/// `id,deltaC,deltaM,n_mutations,unseen_count`.
void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows);

}  // namespace catparc
