#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "catparc/msa.hpp"

namespace catparc {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection, identical on every platform.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Keeps the first u*h columns, splits them into u consecutive groups of h
/// and shuffles the rows of each group with its own permutation. Joint
/// distributions inside a group survive; dependence across groups does not.
Alignment permute_groups(const Alignment& a, std::size_t u, std::size_t h, std::uint64_t seed);

/// u blocks of h latent normals, exchangeable correlation r inside a block
/// and independent across blocks. Each coordinate is cut at the normal
/// quantiles `cut_quantiles` (increasing, inside (0, 1)) and bin b becomes
/// symbols[b].
struct LatentGaussianDesign {
  std::size_t u = 6;
  std::size_t h = 5;
  std::size_t n = 2000;
  double r = 0.0;
  std::vector<double> cut_quantiles{1.0 / 3.0, 2.0 / 3.0};
  std::string symbols = "ACDEFGHIKLMNPQRSTVWY";
  std::uint64_t seed = 1;
};
Alignment latent_gaussian_generator(const LatentGaussianDesign& design);

/// Joint law of the h positions of one group: outcome strings of length h
/// with their probabilities.
struct JointTable {
  std::vector<std::string> outcomes;
  std::vector<double> probabilities;
};

/// Groups are independent; each draws its h positions jointly from its
/// table (one table shared by all groups, or one per group).
struct MultinomialDesign {
  std::size_t u = 6;
  std::size_t h = 5;
  std::size_t n = 2000;
  std::vector<JointTable> tables;
  std::uint64_t seed = 1;
};
Alignment multinomial_generator(const MultinomialDesign& design);

/// Stand-in for a real protein family: thresholded latent Gaussian whose
/// precision matrix couples every pair of columns at most `bandwidth` apart
/// plus a few random long-range pairs. Columns carry min_categories to max_categories
/// residues and some columns a gap state.
struct FamilyDesign {
  std::size_t m = 30;
  std::size_t n = 2000;
  std::size_t bandwidth = 4;
  /// Magnitude range of the off-diagonal precision entries.
  double coupling_min = 0.15;
  double coupling_max = 0.3;
  std::size_t long_range_edges = 8;
  std::size_t min_categories = 2;
  std::size_t max_categories = 5;
  /// Residue b of a column has weight (b + 1)^-skew before jitter; 0 gives
  /// roughly balanced residues, larger values one dominant residue and a
  /// tail of rare ones as in real family alignments.
  double skew = 0.0;
  /// Share of columns that get a gap state.
  double gapped_fraction = 0.3;
  std::uint64_t seed = 1;
};
Alignment synthetic_family(const FamilyDesign& design);

/// Same-group pairs are positive. Pairs hold 0-based columns, i < j.
struct TruthPair {
  std::size_t i = 0, j = 0;
  bool positive = false;
};
std::vector<TruthPair> group_truth(std::size_t u, std::size_t h);

/// `i j label` with 1-based columns.
void write_truth_tsv(std::ostream& out, const std::vector<TruthPair>& truth);
std::vector<TruthPair> read_truth_tsv(std::istream& in);

}  // namespace catparc
