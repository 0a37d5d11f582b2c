#include "catparc/aa_level.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "catparc/distributions.hpp"
#include "catparc/error.hpp"

namespace catparc {

AAPairMatrix normalized_partial_corr(const Eigen::MatrixXd& e_i, const Eigen::MatrixXd& e_j) {
  if (e_i.rows() != e_j.rows() || e_i.rows() == 0)
    throw InputError("normalized_partial_corr: residual blocks must share a nonzero row count");
  AAPairMatrix out;
  const Eigen::Index d1 = e_i.cols(), d2 = e_j.cols();
  out.z.resize(d1, d2);
  out.p.resize(d1, d2);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd numerator = e_i.transpose() * e_j;
  const Eigen::MatrixXd denominator = e_i.cwiseAbs2().transpose() * e_j.cwiseAbs2();
  for (Eigen::Index a = 0; a < d1; ++a)
    for (Eigen::Index b = 0; b < d2; ++b) {
      const double scale = e_i.col(a).squaredNorm() * e_j.col(b).squaredNorm() /
                           static_cast<double>(e_i.rows());
      if (!(denominator(a, b) > 1e-14 * scale)) {
        out.z(a, b) = out.p(a, b) = nan;
        out.missing.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
        continue;
      }
      out.z(a, b) = numerator(a, b) / std::sqrt(denominator(a, b));
      out.p(a, b) = normal_two_sided(out.z(a, b));
    }
  return out;
}

AAPairMatrix aa_pair_matrix(const ResidualCache& cache, const EncodedMatrix& enc, std::size_t gi,
                            std::size_t gj) {
  const PairResiduals res = pair_residuals(cache, enc, gi, gj);
  if (!res.converged) throw NumericError("aa_pair_matrix: pairwise refit did not converge");
  AAPairMatrix out = normalized_partial_corr(res.e_i, res.e_j);
  out.position_i = enc.positions[gi];
  out.position_j = enc.positions[gj];
  out.labels_i = enc.residues_of(gi);
  out.labels_j = enc.residues_of(gj);
  return out;
}

int ResidueGrouping::group_of(char residue) const {
  for (std::size_t g = 0; g < members.size(); ++g)
    if (members[g].find(residue) != std::string::npos) return static_cast<int>(g);
  return -1;
}

ResidueGrouping murphy8() {
  ResidueGrouping g;
  g.members = {"LVIMC", "AG", "ST", "P", "FYW", "EDNQ", "KR", "H"};
  g.names = g.members;
  return g;
}

ResidueGrouping read_grouping(std::istream& in) {
  ResidueGrouping g;
  std::string line, seen;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first, second;
    if (!(fields >> first)) continue;
    fields >> second;
    std::string name = second.empty() ? first : first;
    std::string letters = second.empty() ? first : second;
    for (char& c : letters) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (char c : letters) {
      if (!is_residue(c))
        throw FormatError(fmt::format("grouping line {}: '{}' is not a residue", line_no, c));
      if (seen.find(c) != std::string::npos)
        throw FormatError(fmt::format("grouping line {}: residue '{}' listed twice", line_no, c));
      seen.push_back(c);
    }
    g.names.push_back(name);
    g.members.push_back(letters);
  }
  if (g.members.empty()) throw EmptyInputError("grouping file defines no classes");
  return g;
}

AAGroupStrength aa_group_strength(const AAPairMatrix& aa, const ResidueGrouping& grouping) {
  if (static_cast<Eigen::Index>(aa.labels_i.size()) != aa.z.rows() ||
      static_cast<Eigen::Index>(aa.labels_j.size()) != aa.z.cols())
    throw InputError("aa_group_strength: residue labels do not match the matrix");
  const std::size_t g = grouping.size();
  AAGroupStrength out;
  out.grouping = grouping;
  out.strength = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g));
  std::vector<std::vector<Eigen::Index>> rows(g), cols(g);
  for (std::size_t a = 0; a < aa.labels_i.size(); ++a) {
    const int c = grouping.group_of(aa.labels_i[a]);
    if (c < 0) throw InputError(fmt::format("residue '{}' is not in the grouping", aa.labels_i[a]));
    rows[static_cast<std::size_t>(c)].push_back(static_cast<Eigen::Index>(a));
  }
  for (std::size_t b = 0; b < aa.labels_j.size(); ++b) {
    const int c = grouping.group_of(aa.labels_j[b]);
    if (c < 0) throw InputError(fmt::format("residue '{}' is not in the grouping", aa.labels_j[b]));
    cols[static_cast<std::size_t>(c)].push_back(static_cast<Eigen::Index>(b));
  }
  const Eigen::MatrixXd z = aa.z.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b) {
      if (rows[a].empty() || cols[b].empty()) continue;
      const Eigen::MatrixXd sub = z(rows[a], cols[b]);
      out.strength(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          Eigen::JacobiSVD<Eigen::MatrixXd>(sub).singularValues()(0);
    }
  return out;
}

std::vector<AAEntry> top_aa_pairs(const AAPairMatrix& aa, double p_cutoff, std::size_t k) {
  if (!(p_cutoff > 0.0 && p_cutoff <= 1.0)) throw InputError("top_aa_pairs: p_cutoff must lie in (0, 1]");
  std::vector<AAEntry> out;
  for (Eigen::Index a = 0; a < aa.z.rows(); ++a)
    for (Eigen::Index b = 0; b < aa.z.cols(); ++b) {
      const double p = aa.p(a, b);
      if (std::isnan(p) || !(p < p_cutoff || (p_cutoff == 1.0 && p <= 1.0))) continue;
      const char ri = static_cast<std::size_t>(a) < aa.labels_i.size() ? aa.labels_i[a] : '?';
      const char rj = static_cast<std::size_t>(b) < aa.labels_j.size() ? aa.labels_j[b] : '?';
      out.push_back({ri, rj, aa.z(a, b), p});
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const AAEntry& x, const AAEntry& y) { return std::abs(x.z) > std::abs(y.z); });
  if (out.size() > k) out.resize(k);
  return out;
}

void write_aa_tsv(std::ostream& out, const AAPairMatrix& aa) {
  std::vector<double> p(aa.p.data(), aa.p.data() + aa.p.size());
  const auto adjusted = benjamini_hochberg(p);
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.10g}", v); };
  out << "res_i\tres_j\tz\tp\tbh_adj_p\n";
  // Column-major storage: entry (a, b) sits at a + b * rows.
  for (Eigen::Index a = 0; a < aa.z.rows(); ++a)
    for (Eigen::Index b = 0; b < aa.z.cols(); ++b)
      fmt::print(out, "{}\t{}\t{}\t{}\t{}\n", aa.labels_i[a], aa.labels_j[b], num(aa.z(a, b)),
                 num(aa.p(a, b)), num(adjusted[static_cast<std::size_t>(a + b * aa.z.rows())]));
}

void write_group_strength_tsv(std::ostream& out, const AAGroupStrength& s) {
  out << "group_i\tgroup_j\tstrength\n";
  for (std::size_t a = 0; a < s.grouping.size(); ++a)
    for (std::size_t b = 0; b < s.grouping.size(); ++b)
      fmt::print(out, "{}\t{}\t{:.10g}\n", s.grouping.names[a], s.grouping.names[b],
                 s.strength(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
}

}  // namespace catparc
