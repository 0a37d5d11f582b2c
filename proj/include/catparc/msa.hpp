#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace catparc {

/// The 20 amino-acid letters, alphabetical. Column order inside a position
/// follows this order.
inline constexpr std::string_view kResidues = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr char kGap = '-';

bool is_residue(char c);

enum class MsaFormat { fasta, stockholm, raw_rows };

MsaFormat parse_msa_format(std::string_view name);
/// Guesses the format from a file extension (.fa/.fasta/.a2m, .sto/.stk),
/// falling back to raw rows.
MsaFormat guess_msa_format(std::string_view path);

/// Aligned sequences over the 20 residues plus gap. Symbols are upper-case
/// after parsing; every sequence has the same length.
struct Alignment {
  std::vector<std::string> ids;
  std::vector<std::string> sequences;
  /// Letters outside the alphabet that were mapped to gap during parsing.
  std::size_t unknown_symbols = 0;

  std::size_t num_sequences() const { return sequences.size(); }
  std::size_t num_positions() const {
    return sequences.empty() ? 0 : sequences.front().size();
  }
  char at(std::size_t row, std::size_t position) const {
    return sequences[row][position];
  }
};

/// Parses an alignment. '.' is read as a gap; letters outside the alphabet
/// (X, B, Z, ...) become gaps and are counted in `unknown_symbols`.
/// Throws EmptyInputError on an empty stream and FormatError on ragged rows.
Alignment parse_alignment(std::istream& in, MsaFormat format);
Alignment read_alignment_file(const std::string& path, MsaFormat format);
Alignment read_alignment_file(const std::string& path);

void write_fasta(std::ostream& out, const Alignment& alignment);

/// Builds an alignment from rows, validating and normalizing symbols.
Alignment make_alignment(std::vector<std::string> rows,
                         std::vector<std::string> ids = {});

/// Keeps alignment columns [first, last) in order.
Alignment slice_positions(const Alignment& alignment, std::size_t first,
                          std::size_t last);

/// Drops sequences whose gap fraction exceeds max_gap_fraction.
Alignment filter_gap_fraction(const Alignment& alignment,
                              double max_gap_fraction);

/// Repeatedly removes every sequence carrying a non-gap residue whose
/// proportion at that position (on the current sequence set) is below
/// `threshold`, until no sequence is removed.
Alignment trim_rare_residues(const Alignment& alignment, double threshold);

struct ColumnLabel {
  std::size_t position = 0;  // alignment column index
  char residue = 'A';
};

struct ColumnRange {
  std::size_t begin = 0;
  std::size_t size = 0;
  std::size_t end() const { return begin + size; }
};

/// Indicator design before standardization. Gap columns and constant
/// columns are already removed.
struct OneHotMatrix {
  Eigen::MatrixXd indicators;
  std::vector<ColumnRange> groups;
  /// Alignment column of each retained group.
  std::vector<std::size_t> positions;
  std::vector<ColumnLabel> labels;
  /// Alignment columns with no retained indicator column.
  std::vector<std::size_t> dropped_positions;
  std::size_t alignment_length = 0;
};

/// Standardized one-hot design. Group k holds the columns of alignment
/// column `positions[k]`; groups are contiguous and partition the columns.
struct EncodedMatrix {
  Eigen::MatrixXd x;
  std::vector<ColumnRange> groups;
  std::vector<std::size_t> positions;
  std::vector<ColumnLabel> labels;
  Eigen::VectorXd col_mean;
  Eigen::VectorXd col_sd;
  std::vector<std::size_t> dropped_positions;
  std::size_t alignment_length = 0;

  std::size_t num_rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t num_columns() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t num_groups() const { return groups.size(); }
  std::size_t group_size(std::size_t g) const { return groups[g].size; }
  auto block(std::size_t g) const {
    return x.middleCols(static_cast<Eigen::Index>(groups[g].begin),
                        static_cast<Eigen::Index>(groups[g].size));
  }
  /// Group index of an alignment column, or npos if it was dropped.
  std::size_t group_of_position(std::size_t position) const;
  std::string residues_of(std::size_t g) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Requires at least 3 sequences.
OneHotMatrix one_hot_encode(const Alignment& alignment);
/// Centers and scales each column to unit variance (denominator N).
EncodedMatrix standardize_columns(const OneHotMatrix& onehot);
EncodedMatrix encode_alignment(const Alignment& alignment);

/// TSV with a `pos:res` header row (1-based alignment columns).
void write_encoded_tsv(std::ostream& out, const EncodedMatrix& enc);
nlohmann::json encoded_sidecar(const EncodedMatrix& enc);

}  // namespace catparc
