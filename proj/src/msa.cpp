#include "catparc/msa.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "catparc/error.hpp"

namespace catparc {
namespace {

constexpr std::size_t kAlphabetSize = 20;

int residue_index(char c) {
  const auto pos = kResidues.find(c);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Upper-cases residues, maps '.' to gap and anything else to gap while
// counting it. Whitespace is skipped.
std::string normalize_symbols(std::string_view raw, std::size_t& unknown) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == kGap || u == '.') {
      out.push_back(kGap);
    } else if (residue_index(u) >= 0) {
      out.push_back(u);
    } else {
      out.push_back(kGap);
      ++unknown;
    }
  }
  return out;
}

Alignment finish(std::vector<std::string> ids, std::vector<std::string> raw,
                 std::size_t unknown_start = 0) {
  if (raw.empty()) throw EmptyInputError("alignment contains no sequences");
  Alignment a;
  a.unknown_symbols = unknown_start;
  a.sequences.reserve(raw.size());
  for (auto& r : raw) a.sequences.push_back(normalize_symbols(r, a.unknown_symbols));
  const std::size_t len = a.sequences.front().size();
  for (std::size_t k = 0; k < a.sequences.size(); ++k) {
    if (a.sequences[k].size() != len) {
      throw FormatError(fmt::format(
          "ragged alignment: sequence {} has length {}, expected {}", k + 1,
          a.sequences[k].size(), len));
    }
  }
  if (len == 0) throw EmptyInputError("alignment has zero positions");
  if (ids.size() != a.sequences.size()) {
    ids.clear();
    for (std::size_t k = 0; k < a.sequences.size(); ++k)
      ids.push_back(fmt::format("seq{}", k + 1));
  }
  a.ids = std::move(ids);
  return a;
}

Alignment parse_fasta(std::istream& in) {
  std::vector<std::string> ids, seqs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '>') {
      std::string header = trim(std::string_view(line).substr(1));
      ids.push_back(header.substr(0, header.find_first_of(" \t")));
      seqs.emplace_back();
    } else if (line.front() == ';') {
      continue;
    } else {
      if (seqs.empty()) throw FormatError("FASTA sequence data before first '>' header");
      seqs.back() += line;
    }
  }
  return finish(std::move(ids), std::move(seqs));
}

Alignment parse_stockholm(std::istream& in) {
  std::vector<std::string> ids, seqs;
  std::map<std::string, std::size_t> index;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      if (t.rfind("# STOCKHOLM", 0) != 0)
        throw FormatError("Stockholm input must start with '# STOCKHOLM 1.0'");
      header_seen = true;
      continue;
    }
    if (t == "//") break;
    if (t.front() == '#') continue;
    std::istringstream fields(t);
    std::string id, chunk;
    fields >> id >> chunk;
    if (chunk.empty()) throw FormatError(fmt::format("Stockholm line without sequence: '{}'", t));
    auto [it, inserted] = index.emplace(id, seqs.size());
    if (inserted) {
      ids.push_back(id);
      seqs.emplace_back();
    }
    seqs[it->second] += chunk;
  }
  if (!header_seen) throw EmptyInputError("empty Stockholm input");
  return finish(std::move(ids), std::move(seqs));
}

Alignment parse_raw_rows(std::istream& in) {
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (!t.empty()) rows.push_back(std::move(t));
  }
  return finish({}, std::move(rows));
}

}  // namespace

bool is_residue(char c) { return residue_index(c) >= 0; }

MsaFormat parse_msa_format(std::string_view name) {
  if (name == "fasta" || name == "fa" || name == "a2m") return MsaFormat::fasta;
  if (name == "stockholm" || name == "sto") return MsaFormat::stockholm;
  if (name == "raw" || name == "raw-rows" || name == "rows") return MsaFormat::raw_rows;
  throw InputError(fmt::format("unknown alignment format '{}'", name));
}

MsaFormat guess_msa_format(std::string_view path) {
  for (auto ext : {".fa", ".fasta", ".fas", ".a2m", ".afa"})
    if (ends_with(path, ext)) return MsaFormat::fasta;
  for (auto ext : {".sto", ".stk", ".stockholm"})
    if (ends_with(path, ext)) return MsaFormat::stockholm;
  return MsaFormat::raw_rows;
}

Alignment parse_alignment(std::istream& in, MsaFormat format) {
  switch (format) {
    case MsaFormat::fasta: return parse_fasta(in);
    case MsaFormat::stockholm: return parse_stockholm(in);
    case MsaFormat::raw_rows: return parse_raw_rows(in);
  }
  throw InputError("unsupported alignment format");
}

Alignment read_alignment_file(const std::string& path, MsaFormat format) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open alignment '{}'", path));
  return parse_alignment(in, format);
}

Alignment read_alignment_file(const std::string& path) {
  return read_alignment_file(path, guess_msa_format(path));
}

void write_fasta(std::ostream& out, const Alignment& alignment) {
  for (std::size_t k = 0; k < alignment.num_sequences(); ++k)
    out << '>' << alignment.ids[k] << '\n' << alignment.sequences[k] << '\n';
}

Alignment make_alignment(std::vector<std::string> rows, std::vector<std::string> ids) {
  return finish(std::move(ids), std::move(rows));
}

Alignment slice_positions(const Alignment& alignment, std::size_t first, std::size_t last) {
  if (first >= last || last > alignment.num_positions())
    throw InputError(fmt::format("invalid position range [{}, {}) for length {}", first,
                                 last, alignment.num_positions()));
  Alignment out;
  out.ids = alignment.ids;
  out.unknown_symbols = alignment.unknown_symbols;
  for (const auto& s : alignment.sequences) out.sequences.push_back(s.substr(first, last - first));
  return out;
}

Alignment filter_gap_fraction(const Alignment& alignment, double max_gap_fraction) {
  if (max_gap_fraction >= 1.0) return alignment;
  Alignment out;
  out.unknown_symbols = alignment.unknown_symbols;
  const double m = static_cast<double>(alignment.num_positions());
  for (std::size_t k = 0; k < alignment.num_sequences(); ++k) {
    const auto& s = alignment.sequences[k];
    const double gaps = static_cast<double>(std::count(s.begin(), s.end(), kGap));
    if (gaps / m <= max_gap_fraction) {
      out.ids.push_back(alignment.ids[k]);
      out.sequences.push_back(s);
    }
  }
  if (out.sequences.empty())
    throw DegenerateDataError("gap-fraction filter removed every sequence");
  return out;
}

Alignment trim_rare_residues(const Alignment& alignment, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw InputError(fmt::format("trim threshold must lie in [0, 1), got {}", threshold));
  Alignment current = alignment;
  const std::size_t m = alignment.num_positions();
  while (true) {
    const std::size_t n = current.num_sequences();
    std::vector<std::array<std::size_t, kAlphabetSize>> counts(m);
    for (auto& c : counts) c.fill(0);
    for (const auto& s : current.sequences)
      for (std::size_t p = 0; p < m; ++p)
        if (const int r = residue_index(s[p]); r >= 0) ++counts[p][static_cast<std::size_t>(r)];

    const double nd = static_cast<double>(n);
    Alignment kept;
    kept.unknown_symbols = current.unknown_symbols;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& s = current.sequences[k];
      bool rare = false;
      for (std::size_t p = 0; p < m && !rare; ++p) {
        const int r = residue_index(s[p]);
        rare = r >= 0 && static_cast<double>(counts[p][static_cast<std::size_t>(r)]) / nd < threshold;
      }
      if (!rare) {
        kept.ids.push_back(current.ids[k]);
        kept.sequences.push_back(s);
      }
    }
    if (kept.sequences.empty())
      throw DegenerateDataError("rare-residue trimming removed every sequence");
    if (kept.num_sequences() == n) return kept;
    current = std::move(kept);
  }
}

OneHotMatrix one_hot_encode(const Alignment& alignment) {
  const std::size_t n = alignment.num_sequences();
  const std::size_t m = alignment.num_positions();
  if (n < 3)
    throw DegenerateDataError(fmt::format("encoding needs at least 3 sequences, got {}", n));

  OneHotMatrix out;
  out.alignment_length = m;
  std::vector<std::array<std::size_t, kAlphabetSize>> counts(m);
  for (auto& c : counts) c.fill(0);
  for (const auto& s : alignment.sequences)
    for (std::size_t p = 0; p < m; ++p)
      if (const int r = residue_index(s[p]); r >= 0) ++counts[p][static_cast<std::size_t>(r)];

  std::size_t d_total = 0;
  for (std::size_t p = 0; p < m; ++p) {
    ColumnRange range{d_total, 0};
    for (std::size_t r = 0; r < kAlphabetSize; ++r) {
      const std::size_t c = counts[p][r];
      if (c == 0 || c == n) continue;  // constant column
      out.labels.push_back({p, kResidues[r]});
      ++range.size;
    }
    if (range.size == 0) {
      out.dropped_positions.push_back(p);
      continue;
    }
    out.groups.push_back(range);
    out.positions.push_back(p);
    d_total += range.size;
  }

  out.indicators = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                         static_cast<Eigen::Index>(d_total));
  for (std::size_t j = 0; j < d_total; ++j) {
    const auto& label = out.labels[j];
    for (std::size_t k = 0; k < n; ++k)
      if (alignment.sequences[k][label.position] == label.residue)
        out.indicators(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = 1.0;
  }
  return out;
}

EncodedMatrix standardize_columns(const OneHotMatrix& onehot) {
  EncodedMatrix enc;
  enc.groups = onehot.groups;
  enc.positions = onehot.positions;
  enc.labels = onehot.labels;
  enc.dropped_positions = onehot.dropped_positions;
  enc.alignment_length = onehot.alignment_length;

  const auto n = static_cast<double>(onehot.indicators.rows());
  enc.x = onehot.indicators;
  enc.col_mean = enc.x.colwise().mean().transpose();
  enc.x.rowwise() -= enc.col_mean.transpose();
  enc.col_sd = (enc.x.colwise().squaredNorm() / n).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < enc.x.cols(); ++j) {
    if (!(enc.col_sd(j) > 0.0))
      throw DegenerateDataError(fmt::format("column {} has zero variance", j));
    enc.x.col(j) /= enc.col_sd(j);
  }
  return enc;
}

EncodedMatrix encode_alignment(const Alignment& alignment) {
  return standardize_columns(one_hot_encode(alignment));
}

std::size_t EncodedMatrix::group_of_position(std::size_t position) const {
  const auto it = std::lower_bound(positions.begin(), positions.end(), position);
  if (it == positions.end() || *it != position) return npos;
  return static_cast<std::size_t>(it - positions.begin());
}

std::string EncodedMatrix::residues_of(std::size_t g) const {
  std::string out;
  for (std::size_t c = groups[g].begin; c < groups[g].end(); ++c) out.push_back(labels[c].residue);
  return out;
}

void write_encoded_tsv(std::ostream& out, const EncodedMatrix& enc) {
  for (std::size_t j = 0; j < enc.labels.size(); ++j) {
    if (j) out << '\t';
    out << enc.labels[j].position + 1 << ':' << enc.labels[j].residue;
  }
  out << '\n';
  for (Eigen::Index k = 0; k < enc.x.rows(); ++k) {
    for (Eigen::Index j = 0; j < enc.x.cols(); ++j) {
      if (j) out << '\t';
      out << fmt::format("{:.10g}", enc.x(k, j));
    }
    out << '\n';
  }
}

nlohmann::json encoded_sidecar(const EncodedMatrix& enc) {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < enc.groups.size(); ++g) {
    groups.push_back({{"position", enc.positions[g] + 1},
                      {"begin", enc.groups[g].begin},
                      {"size", enc.groups[g].size},
                      {"residues", enc.residues_of(g)}});
  }
  std::vector<std::size_t> dropped;
  for (auto p : enc.dropped_positions) dropped.push_back(p + 1);
  std::vector<double> mean(enc.col_mean.data(), enc.col_mean.data() + enc.col_mean.size());
  std::vector<double> sd(enc.col_sd.data(), enc.col_sd.data() + enc.col_sd.size());
  return {{"num_sequences", enc.num_rows()},
          {"num_columns", enc.num_columns()},
          {"alignment_length", enc.alignment_length},
          {"groups", groups},
          {"dropped_positions", dropped},
          {"col_mean", mean},
          {"col_sd", sd}};
}

}  // namespace catparc
