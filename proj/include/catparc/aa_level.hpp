#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catparc/msa.hpp"
#include "catparc/pairwise.hpp"

namespace catparc {

/// Self-normalized residual cross products for every residue combination of
/// one pair: z = sum_k e_i[k,t1] e_j[k,t2] / sqrt(sum_k e_i[k,t1]^2 e_j[k,t2]^2),
/// approximately standard normal under no partial correlation.
struct AAPairMatrix {
  /// Alignment columns; npos when built from bare residual blocks.
  std::size_t position_i = EncodedMatrix::npos;
  std::size_t position_j = EncodedMatrix::npos;
  std::string labels_i;
  std::string labels_j;
  Eigen::MatrixXd z;
  Eigen::MatrixXd p;
  /// Entries whose denominator vanished; z and p are NaN there.
  std::vector<std::pair<std::size_t, std::size_t>> missing;
};

AAPairMatrix normalized_partial_corr(const Eigen::MatrixXd& e_i, const Eigen::MatrixXd& e_j);

/// Builds the residuals of groups gi and gj the same way the pair test does
/// and labels rows / columns with their residues.
AAPairMatrix aa_pair_matrix(const ResidualCache& cache, const EncodedMatrix& enc, std::size_t gi,
                            std::size_t gj);

/// Partition of the 20 residues into named classes.
struct ResidueGrouping {
  std::vector<std::string> names;
  std::vector<std::string> members;

  /// Class index of a residue, or -1.
  int group_of(char residue) const;
  std::size_t size() const { return names.size(); }
};

/// Eight classes: LVIMC, AG, ST, P, FYW, EDNQ, KR, H.
ResidueGrouping murphy8();

/// One class per line: `name<TAB>LETTERS` or just `LETTERS`. '#' starts a
/// comment. Throws FormatError if a residue is repeated or unknown.
ResidueGrouping read_grouping(std::istream& in);

struct AAGroupStrength {
  ResidueGrouping grouping;
  /// Largest singular value of the z submatrix of each class pair; 0 when
  /// the submatrix is empty. Missing entries count as 0.
  Eigen::MatrixXd strength;
};
AAGroupStrength aa_group_strength(const AAPairMatrix& aa, const ResidueGrouping& grouping);

struct AAEntry {
  char residue_i = 'A';
  char residue_j = 'A';
  double z = 0.0;
  double p = 1.0;
};
/// Entries with p < p_cutoff by |z| descending, at most k of them.
std::vector<AAEntry> top_aa_pairs(const AAPairMatrix& aa, double p_cutoff, std::size_t k);

/// `res_i res_j z p bh_adj_p`, BH within the pair.
void write_aa_tsv(std::ostream& out, const AAPairMatrix& aa);
/// `group_i group_j strength`.
void write_group_strength_tsv(std::ostream& out, const AAGroupStrength& s);

}  // namespace catparc
