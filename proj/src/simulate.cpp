#include "catparc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "catparc/error.hpp"
#include "catparc/linalg.hpp"

namespace catparc {
namespace {

double uniform01(Rng& rng) {
  // 53 random bits -> [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t k = v.size(); k > 1; --k) std::swap(v[k - 1], v[uniform_index(rng, k)]);
}

std::vector<double> normal_cuts(const std::vector<double>& quantiles) {
  const boost::math::normal_distribution<double> normal;
  std::vector<double> cuts;
  for (double q : quantiles) cuts.push_back(boost::math::quantile(normal, q));
  return cuts;
}

std::size_t bin_of(double z, const std::vector<double>& cuts) {
  return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), z) - cuts.begin());
}

Alignment from_rows(std::vector<std::string> rows) {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) ids.push_back(fmt::format("sim{}", k + 1));
  return make_alignment(std::move(rows), std::move(ids));
}

}  // namespace

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw InputError("uniform_index: empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = Rng::max() - (Rng::max() % range + 1) % range;
  std::uint64_t draw = rng();
  while (draw > limit) draw = rng();
  return static_cast<std::size_t>(draw % range);
}

Alignment permute_groups(const Alignment& a, std::size_t u, std::size_t h, std::uint64_t seed) {
  if (u == 0 || h == 0) throw InputError("permute_groups: u and h must be positive");
  if (a.num_positions() < u * h)
    throw InputError(fmt::format("permute_groups: alignment has {} columns, need u*h = {}",
                                 a.num_positions(), u * h));
  if (a.num_sequences() < 2) throw InputError("permute_groups: need at least 2 sequences");
  const std::size_t n = a.num_sequences();
  Rng rng(seed);
  Alignment out;
  out.ids = a.ids;
  out.sequences.assign(n, std::string(u * h, kGap));
  std::vector<std::size_t> order(n);
  for (std::size_t g = 0; g < u; ++g) {
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    shuffle(order, rng);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t p = g * h; p < (g + 1) * h; ++p) out.sequences[k][p] = a.at(order[k], p);
  }
  return out;
}

Alignment latent_gaussian_generator(const LatentGaussianDesign& d) {
  if (d.u == 0 || d.h == 0 || d.n == 0) throw InputError("latent_gaussian: u, h, n must be positive");
  const double lower = d.h > 1 ? -1.0 / static_cast<double>(d.h - 1) : -1.0;
  if (!(d.r >= lower && d.r <= 1.0))
    throw InputError(fmt::format("latent_gaussian: exchangeable correlation {} is not PSD for h={}",
                                 d.r, d.h));
  if (!std::is_sorted(d.cut_quantiles.begin(), d.cut_quantiles.end()) ||
      (!d.cut_quantiles.empty() &&
       !(d.cut_quantiles.front() > 0.0 && d.cut_quantiles.back() < 1.0)))
    throw InputError("latent_gaussian: cut quantiles must be increasing inside (0, 1)");
  if (d.symbols.size() < d.cut_quantiles.size() + 1)
    throw InputError("latent_gaussian: not enough symbols for the number of bins");
  const auto cuts = normal_cuts(d.cut_quantiles);
  // Exchangeable block: Sigma = r 11^T + (1 - r) I. For r < 0 use the
  // eigen-factor of the block instead of the shared-factor construction.
  const Eigen::MatrixXd block =
      d.r * Eigen::MatrixXd::Ones(d.h, d.h) + (1.0 - d.r) * Eigen::MatrixXd::Identity(d.h, d.h);
  const auto spec = sym_eig(block);
  const Eigen::MatrixXd factor =
      spec.vectors * spec.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Rng rng(d.seed);
  std::normal_distribution<double> normal;
  std::vector<std::string> rows(d.n, std::string(d.u * d.h, kGap));
  Eigen::VectorXd g(d.h);
  for (std::size_t k = 0; k < d.n; ++k) {
    for (std::size_t b = 0; b < d.u; ++b) {
      for (std::size_t t = 0; t < d.h; ++t) g(static_cast<Eigen::Index>(t)) = normal(rng);
      const Eigen::VectorXd z = factor * g;
      for (std::size_t t = 0; t < d.h; ++t)
        rows[k][b * d.h + t] = d.symbols[bin_of(z(static_cast<Eigen::Index>(t)), cuts)];
    }
  }
  return from_rows(std::move(rows));
}

Alignment multinomial_generator(const MultinomialDesign& d) {
  if (d.u == 0 || d.h == 0 || d.n == 0) throw InputError("multinomial: u, h, n must be positive");
  if (d.tables.size() != 1 && d.tables.size() != d.u)
    throw InputError("multinomial: need one shared table or one table per group");
  std::vector<std::vector<double>> cumulative;
  for (const auto& t : d.tables) {
    if (t.outcomes.empty() || t.outcomes.size() != t.probabilities.size())
      throw InputError("multinomial: outcomes and probabilities must match and be nonempty");
    std::vector<double> c;
    double total = 0.0;
    for (std::size_t k = 0; k < t.outcomes.size(); ++k) {
      if (t.outcomes[k].size() != d.h)
        throw InputError(fmt::format("multinomial: outcome '{}' is not of length h={}",
                                     t.outcomes[k], d.h));
      if (!(t.probabilities[k] >= 0.0)) throw InputError("multinomial: negative probability");
      total += t.probabilities[k];
      c.push_back(total);
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw InputError(fmt::format("multinomial: probabilities sum to {}", total));
    c.back() = 1.0;
    cumulative.push_back(std::move(c));
  }
  Rng rng(d.seed);
  std::vector<std::string> rows(d.n, std::string(d.u * d.h, kGap));
  for (std::size_t k = 0; k < d.n; ++k) {
    for (std::size_t b = 0; b < d.u; ++b) {
      const std::size_t t = d.tables.size() == 1 ? 0 : b;
      const auto& c = cumulative[t];
      const double x = uniform01(rng);
      std::size_t pick = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), x) - c.begin());
      pick = std::min(pick, c.size() - 1);
      rows[k].replace(b * d.h, d.h, d.tables[t].outcomes[pick]);
    }
  }
  return from_rows(std::move(rows));
}

Alignment synthetic_family(const FamilyDesign& d) {
  if (d.m < 2 || d.n == 0) throw InputError("synthetic_family: need m >= 2 and n > 0");
  if (d.min_categories < 2 || d.max_categories > kResidues.size() ||
      d.min_categories > d.max_categories)
    throw InputError("synthetic_family: need 2 <= min_categories <= max_categories <= 20");
  if (!(d.skew >= 0.0)) throw InputError("synthetic_family: skew must be >= 0");
  Rng rng(d.seed);
  const auto m = static_cast<Eigen::Index>(d.m);
  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(m, m);
  auto coupling = [&] {
    const double v = uniform(rng, d.coupling_min, d.coupling_max);
    return uniform01(rng) < 0.5 ? -v : v;
  };
  const auto band = static_cast<Eigen::Index>(d.bandwidth);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m && j - i <= band; ++j) omega(i, j) = omega(j, i) = coupling();
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t e = 0, attempts = 0; e < d.long_range_edges && attempts < 100 * d.m; ++attempts) {
    std::size_t a = uniform_index(rng, d.m), b = uniform_index(rng, d.m);
    if (a > b) std::swap(a, b);
    if (b - a <= d.bandwidth || !used.insert({a, b}).second) continue;
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    omega(ia, ib) = omega(ib, ia) = coupling();
    ++e;
  }
  const double smallest = sym_eig(omega).values.minCoeff();
  if (smallest < 0.2) omega.diagonal().array() += 0.2 - smallest;
  Eigen::MatrixXd sigma = omega.inverse();
  const Eigen::VectorXd scale = sigma.diagonal().cwiseSqrt().cwiseInverse();
  sigma = scale.asDiagonal() * sigma * scale.asDiagonal();
  const Eigen::MatrixXd chol = sigma.llt().matrixL();

  // Per column: residue set, bin proportions and (maybe) a gap bin.
  std::vector<std::vector<double>> cuts(d.m);
  std::vector<std::string> symbols(d.m);
  for (std::size_t p = 0; p < d.m; ++p) {
    const std::size_t k =
        d.min_categories + uniform_index(rng, d.max_categories - d.min_categories + 1);
    std::vector<std::size_t> letters(kResidues.size());
    for (std::size_t a = 0; a < letters.size(); ++a) letters[a] = a;
    shuffle(letters, rng);
    std::vector<double> weights;
    for (std::size_t b = 0; b < k; ++b) {
      symbols[p].push_back(kResidues[letters[b]]);
      weights.push_back(uniform(rng, 0.5, 1.5) * std::pow(static_cast<double>(b + 1), -d.skew));
    }
    double gap = 0.0;
    if (uniform01(rng) < d.gapped_fraction) {
      gap = uniform(rng, 0.03, 0.12);
      symbols[p].push_back(kGap);
    }
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<double> quantiles;
    double acc = 0.0;
    for (std::size_t b = 0; b + 1 < k; ++b) {
      acc += (1.0 - gap) * weights[b] / total;
      quantiles.push_back(acc);
    }
    if (gap > 0.0) quantiles.push_back(1.0 - gap);
    cuts[p] = normal_cuts(quantiles);
  }

  std::normal_distribution<double> normal;
  std::vector<std::string> rows(d.n, std::string(d.m, kGap));
  Eigen::VectorXd g(m);
  for (std::size_t k = 0; k < d.n; ++k) {
    for (Eigen::Index t = 0; t < m; ++t) g(t) = normal(rng);
    const Eigen::VectorXd z = chol * g;
    for (std::size_t p = 0; p < d.m; ++p)
      rows[k][p] = symbols[p][bin_of(z(static_cast<Eigen::Index>(p)), cuts[p])];
  }
  return from_rows(std::move(rows));
}

std::vector<TruthPair> group_truth(std::size_t u, std::size_t h) {
  std::vector<TruthPair> out;
  const std::size_t m = u * h;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) out.push_back({i, j, h > 0 && i / h == j / h});
  return out;
}

void write_truth_tsv(std::ostream& out, const std::vector<TruthPair>& truth) {
  out << "i\tj\tlabel\n";
  for (const auto& t : truth) fmt::print(out, "{}\t{}\t{:d}\n", t.i + 1, t.j + 1, t.positive);
}

std::vector<TruthPair> read_truth_tsv(std::istream& in) {
  std::vector<TruthPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, c;
    if (!(fields >> a >> b >> c)) throw FormatError(fmt::format("truth line {}: need 3 fields", line_no));
    if (a == "i" && b == "j") continue;
    try {
      const std::size_t i = std::stoul(a), j = std::stoul(b);
      const int label = std::stoi(c);
      if (i == 0 || j == 0 || i == j || (label != 0 && label != 1)) throw std::invalid_argument(line);
      out.push_back({std::min(i, j) - 1, std::max(i, j) - 1, label == 1});
    } catch (const std::logic_error&) {
      throw FormatError(fmt::format("truth line {}: expected 'i j label' with 1-based columns "
                                    "and label 0/1",
                                    line_no));
    }
  }
  if (out.empty()) throw EmptyInputError("truth file has no pairs");
  return out;
}

}  // namespace catparc
