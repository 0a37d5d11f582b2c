#include "catparc/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "catparc/error.hpp"
#include "catparc/parallel.hpp"

namespace catparc {
namespace {

char normalize(char c) {
  if (c == '.') return kGap;
  return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
}

int index_of(const PartialCovMap& map, std::size_t g, char c) {
  return map.residue_index[g][static_cast<unsigned char>(normalize(c))];
}

PartialCovMap empty_map(const EncodedMatrix& enc, std::string method) {
  PartialCovMap map;
  map.method = std::move(method);
  map.alignment_length = enc.alignment_length;
  map.positions = enc.positions;
  for (std::size_t g = 0; g < enc.num_groups(); ++g) map.residues.push_back(enc.residues_of(g));
  const std::size_t m = enc.num_groups();
  map.blocks.resize(m * (m > 0 ? m - 1 : 0) / 2);
  map.present.assign(map.blocks.size(), 0);
  return map;
}

std::vector<char> wanted_pairs(const PartialCovMap& map, const std::optional<PairScreen>& screen) {
  std::vector<char> wanted(map.blocks.size(), screen ? 0 : 1);
  if (screen)
    for (auto [a, b] : *screen) {
      if (a == b || std::max(a, b) >= map.num_groups())
        throw InputError(fmt::format("pair screen names an invalid pair ({}, {})", a, b));
      wanted[map.pair_index(std::min(a, b), std::max(a, b))] = 1;
    }
  return wanted;
}

void check_length(const std::string& seq, const PartialCovMap& map, const std::string& what) {
  if (seq.size() != map.alignment_length)
    throw InputError(fmt::format("{} has length {}, alignment has {} columns", what, seq.size(),
                                 map.alignment_length));
}

}  // namespace

std::size_t PartialCovMap::pair_index(std::size_t a, std::size_t b) const {
  const std::size_t m = num_groups();
  return a * m - a * (a + 1) / 2 + (b - a - 1);
}

bool PartialCovMap::has(std::size_t a, std::size_t b) const {
  if (a == b) return false;
  return present[pair_index(std::min(a, b), std::max(a, b))] != 0;
}

double PartialCovMap::value(std::size_t a, std::size_t b, int x, int y) const {
  if (a == b || x < 0 || y < 0) return 0.0;
  if (a < b) {
    const std::size_t k = pair_index(a, b);
    return present[k] ? blocks[k](x, y) : 0.0;
  }
  const std::size_t k = pair_index(b, a);
  return present[k] ? blocks[k](y, x) : 0.0;
}

Eigen::MatrixXd PartialCovMap::matrix(std::size_t a, std::size_t b) const {
  const auto da = static_cast<Eigen::Index>(residues[a].size());
  const auto db = static_cast<Eigen::Index>(residues[b].size());
  if (!has(a, b)) return Eigen::MatrixXd::Zero(da, db);
  if (a < b) return blocks[pair_index(a, b)];
  return blocks[pair_index(b, a)].transpose();
}

PairScreen screen_pairs(const std::vector<PairResult>& results, double alpha, PValueKind kind) {
  PairScreen out;
  for (const auto& r : results)
    if (!r.failed && r.pvalue(kind) < alpha) out.emplace_back(std::min(r.i, r.j), std::max(r.i, r.j));
  return out;
}

void index_map(PartialCovMap& map) {
  const std::size_t m = map.num_groups();
  map.residue_index.assign(m, {});
  for (std::size_t g = 0; g < m; ++g) {
    map.residue_index[g].fill(-1);
    for (std::size_t x = 0; x < map.residues[g].size(); ++x)
      map.residue_index[g][static_cast<unsigned char>(map.residues[g][x])] = static_cast<int>(x);
  }
  map.group_of_position.assign(map.alignment_length, EncodedMatrix::npos);
  for (std::size_t g = 0; g < m; ++g) map.group_of_position[map.positions[g]] = g;
  map.marginal.assign(m, {});
  for (std::size_t g = 0; g < m; ++g) {
    map.marginal[g] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.residues[g].size()));
    for (std::size_t b = 0; b < m; ++b) {
      if (b == g || !map.has(g, b)) continue;
      map.marginal[g] += map.matrix(g, b).rowwise().sum();
    }
  }
}

PartialCovMap partial_cov_map(const ResidualCache& cache, const EncodedMatrix& enc,
                              const std::optional<PairScreen>& screen, unsigned threads) {
  PartialCovMap map = empty_map(enc, "partial_cov");
  const std::vector<char> wanted = wanted_pairs(map, screen);
  const std::size_t m = map.num_groups();
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      if (wanted[map.pair_index(a, b)]) jobs.emplace_back(a, b);
      else ++map.screened_pairs;
    }
  std::vector<char> failed(jobs.size(), 0);
  const double n = static_cast<double>(enc.num_rows());
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    const auto [a, b] = jobs[k];
    try {
      if (!cache.ok(a) || !cache.ok(b)) throw NumericError("one-vs-rest fit failed");
      const PairResiduals res = pair_residuals(cache, enc, a, b);
      const std::size_t slot = map.pair_index(a, b);
      map.blocks[slot] = res.e_i.transpose() * res.e_j / n;
      map.present[slot] = 1;
    } catch (const Error&) {
      failed[k] = 1;
    }
  });
  map.failed_pairs = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  index_map(map);
  return map;
}

PartialCovMap precision_map(const PrecisionEstimate& est, const EncodedMatrix& enc,
                            const std::optional<PairScreen>& screen) {
  if (est.omega.rows() != static_cast<Eigen::Index>(enc.num_columns()))
    throw InputError("precision_map: precision matrix does not match the encoding");
  PartialCovMap map = empty_map(enc, "psicov");
  const std::vector<char> wanted = wanted_pairs(map, screen);
  const std::size_t m = map.num_groups();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const std::size_t slot = map.pair_index(a, b);
      if (!wanted[slot]) {
        ++map.screened_pairs;
        continue;
      }
      map.blocks[slot] = est.omega.block(static_cast<Eigen::Index>(enc.groups[a].begin),
                                         static_cast<Eigen::Index>(enc.groups[b].begin),
                                         static_cast<Eigen::Index>(enc.groups[a].size),
                                         static_cast<Eigen::Index>(enc.groups[b].size));
      map.present[slot] = 1;
    }
  index_map(map);
  return map;
}

SequenceScores sequence_scores(const std::string& sequence, const PartialCovMap& map) {
  check_length(sequence, map, "sequence");
  const std::size_t m = map.num_groups();
  std::vector<int> idx(m);
  SequenceScores out;
  for (std::size_t g = 0; g < m; ++g) {
    const char c = normalize(sequence[map.positions[g]]);
    idx[g] = index_of(map, g, c);
    if (idx[g] < 0 && c != kGap) ++out.unseen;
  }
  for (std::size_t a = 0; a < m; ++a) {
    if (idx[a] < 0) continue;
    out.m += map.marginal[a](idx[a]);
    for (std::size_t b = a + 1; b < m; ++b) out.c += map.value(a, b, idx[a], idx[b]);
  }
  return out;
}

FeatureRow delta_feature(const Mutant& mutant, const std::string& wildtype,
                         const PartialCovMap& map) {
  check_length(wildtype, map, "wild type");
  check_length(mutant.sequence, map, fmt::format("mutant '{}'", mutant.id));
  FeatureRow row;
  row.id = mutant.id;
  const std::size_t m = map.num_groups();
  for (std::size_t p = 0; p < map.alignment_length; ++p)
    if (normalize(mutant.sequence[p]) != normalize(wildtype[p])) ++row.n_mutations;
  std::vector<int> mut(m), wt(m);
  std::vector<char> changed(m, 0);
  std::vector<std::size_t> sites;
  for (std::size_t g = 0; g < m; ++g) {
    const char cm = normalize(mutant.sequence[map.positions[g]]);
    const char cw = normalize(wildtype[map.positions[g]]);
    mut[g] = index_of(map, g, cm);
    wt[g] = index_of(map, g, cw);
    if (mut[g] < 0 && cm != kGap) ++row.unseen_count;
    if (cm != cw) {
      changed[g] = 1;
      sites.push_back(g);
    }
  }
  for (std::size_t s : sites) {
    if (mut[s] >= 0) row.delta_m += map.marginal[s](mut[s]);
    if (wt[s] >= 0) row.delta_m -= map.marginal[s](wt[s]);
    for (std::size_t b = 0; b < m; ++b) {
      // A pair of two mutated columns is counted from its smaller end only.
      if (b == s || (changed[b] && b < s)) continue;
      row.delta_c += map.value(s, b, mut[s], mut[b]) - map.value(s, b, wt[s], wt[b]);
    }
  }
  return row;
}

std::vector<FeatureRow> delta_features(const std::vector<Mutant>& mutants,
                                       const std::string& wildtype, const PartialCovMap& map,
                                       unsigned threads) {
  std::vector<FeatureRow> rows(mutants.size());
  parallel_for(mutants.size(), threads,
               [&](std::size_t k) { rows[k] = delta_feature(mutants[k], wildtype, map); });
  return rows;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t k = 0; k < order.size();) {
    std::size_t end = k;
    while (end + 1 < order.size() && v[order[end + 1]] == v[order[k]]) ++end;
    const double r = 0.5 * static_cast<double>(k + end) + 1.0;
    for (std::size_t t = k; t <= end; ++t) ranks[order[t]] = r;
    k = end + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("spearman: inputs differ in length");
  if (x.size() < 2) throw InputError("spearman: need at least two observations");
  for (std::size_t k = 0; k < x.size(); ++k)
    if (std::isnan(x[k]) || std::isnan(y[k])) throw InputError("spearman: NaN input");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mean = 0.5 * static_cast<double>(x.size() + 1);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (rx[k] - mean) * (ry[k] - mean);
    sxx += (rx[k] - mean) * (rx[k] - mean);
    syy += (ry[k] - mean) * (ry[k] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

std::vector<Mutant> read_mutants_csv(std::istream& in) {
  std::vector<Mutant> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    if (line_no == 1 && !fields.empty() && fields[0] == "id") continue;
    if (fields.size() < 2 || fields.size() > 3)
      throw FormatError(fmt::format("mutants line {}: expected id,sequence[,effect]", line_no));
    Mutant mt;
    mt.id = fields[0];
    mt.sequence = fields[1];
    for (char& c : mt.sequence) c = normalize(c);
    if (fields.size() == 3 && !fields[2].empty() && fields[2] != "NA") {
      try {
        std::size_t used = 0;
        mt.effect = std::stod(fields[2], &used);
        if (used != fields[2].size()) throw std::invalid_argument(fields[2]);
      } catch (const std::logic_error&) {
        throw FormatError(fmt::format("mutants line {}: effect '{}' is not a number", line_no, fields[2]));
      }
    }
    out.push_back(std::move(mt));
  }
  return out;
}

void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
  out << "id,deltaC,deltaM,n_mutations,unseen_count\n";
  for (const auto& r : rows)
    fmt::print(out, "{},{:.12g},{:.12g},{},{}\n", r.id, r.delta_c, r.delta_m, r.n_mutations,
               r.unseen_count);
}

}  // namespace catparc
