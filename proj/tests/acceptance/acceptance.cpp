// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "catparc/aa_level.hpp"
#include "catparc/baselines.hpp"
#include "catparc/bench.hpp"
#include "catparc/distributions.hpp"
#include "catparc/features.hpp"
#include "catparc/group_lasso.hpp"
#include "catparc/pairwise.hpp"
#include "catparc/simulate.hpp"
#include "oracles.hpp"

using namespace catparc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<ColumnRange> consecutive(const std::vector<std::size_t>& sizes) {
  std::vector<ColumnRange> out;
  std::size_t begin = 0;
  for (std::size_t s : sizes) {
    out.push_back({begin, s});
    begin += s;
  }
  return out;
}

// Encoded matrix over continuous columns, for designs where the regression
// errors are known in closed form.
EncodedMatrix continuous_encoding(const Eigen::MatrixXd& raw, const std::vector<std::size_t>& sizes) {
  EncodedMatrix enc;
  enc.x = oracle::standardize(raw);
  enc.groups = consecutive(sizes);
  enc.alignment_length = sizes.size();
  const double n = static_cast<double>(raw.rows());
  enc.col_mean = raw.colwise().mean().transpose();
  enc.col_sd.resize(raw.cols());
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    enc.positions.push_back(g);
    for (std::size_t c = 0; c < sizes[g]; ++c)
      enc.labels.push_back({g, "ACDEFGHIKLMNPQRSTVWY"[c]});
  }
  for (Eigen::Index c = 0; c < raw.cols(); ++c)
    enc.col_sd(c) = std::sqrt((raw.col(c).array() - enc.col_mean(c)).square().sum() / n);
  return enc;
}

// Latent null: 6 groups of 5 columns, no dependence anywhere.
Outcome ac1_type1() {
  std::vector<double> rates;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    LatentGaussianDesign d;
    d.u = 6, d.h = 5, d.n = 2000, d.r = 0.0, d.seed = seed;
    const auto enc = encode_alignment(latent_gaussian_generator(d));
    PairwiseOptions opts;
    opts.weighted = true;
    const auto results = test_all_pairs(enc, opts);
    std::size_t rejected = 0, tested = 0;
    for (const auto& r : results) {
      if (r.failed || std::isnan(r.p_weighted)) continue;
      ++tested;
      rejected += r.p_weighted < 0.05;
    }
    rates.push_back(static_cast<double>(rejected) / static_cast<double>(tested));
  }
  const double med = median(rates);
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  return {med >= 0.03 && med <= 0.07,
          fmt::format("median Type-I {:.4f} over 50 seeds (range {:.4f}..{:.4f}), need [0.03, 0.07]", med, *lo,
                      *hi)};
}

// Synthetic family, rows permuted within 6 groups of 5 columns; same-group
// pairs are the positives.
Outcome ac2_power() {
  const std::size_t u = 6, h = 5, seeds = 20;
  std::vector<double> cat, psi, mi;
  const auto truth = group_truth(u, h);
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    FamilyDesign d;
    d.m = u * h, d.n = 2000, d.seed = seed;
    const auto a = permute_groups(synthetic_family(d), u, h, seed ^ 0x9e3779b97f4a7c15ULL);
    const auto enc = encode_alignment(a);
    PairwiseOptions opts;
    const auto cache = one_vs_rest_all(enc, opts.penalty);
    auto rows = catparc_rankings(test_all_pairs(cache, enc, opts));
    BaselineOptions b;
    b.l2 = b.linf = false;
    const auto base = baseline_rankings(a, enc, cache, b);
    rows.insert(rows.end(), base.begin(), base.end());
    const auto eval = evaluate_rankings(rows, truth, 0.05);
    cat.push_back(eval.at("CATParc").auc);
    psi.push_back(eval.at("PSICOV").auc);
    mi.push_back(eval.at("MI").auc);
  }
  const double c = median(cat), p = median(psi), m = median(mi);
  return {c >= p && p >= m && c - m >= 0.05,
          fmt::format("median AUC CATParc {:.4f} >= PSICOV {:.4f} >= MI {:.4f}, CATParc - MI = {:.4f} (need >= 0.05), "
                      "{} seeds",
                      c, p, m, c - m, seeds)};
}

// Gaussian design over 6 groups of 2 columns with a sparse block precision.
// The oracle residual of group i for pair (i, j) uses the population
// regression on the other four groups.
Outcome ac3_oracle() {
  const std::size_t m = 6, d = 2;
  const Eigen::Index p = static_cast<Eigen::Index>(m * d), n = 5000;
  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(p, p);
  auto couple = [&](std::size_t a, std::size_t b, double v) {
    for (std::size_t s = 0; s < d; ++s) {
      const auto x = static_cast<Eigen::Index>(a * d + s), y = static_cast<Eigen::Index>(b * d + s);
      omega(x, y) = omega(y, x) = v;
    }
    const auto x = static_cast<Eigen::Index>(a * d), y = static_cast<Eigen::Index>(b * d + 1);
    omega(x, y) = omega(y, x) = -0.5 * v;
  };
  couple(0, 1, 0.3);
  couple(1, 2, -0.25);
  couple(3, 4, 0.3);
  couple(4, 5, 0.2);
  const Eigen::MatrixXd sigma = omega.inverse();
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  std::size_t within = 0, total = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::MatrixXd raw = oracle::gaussian_matrix(rng, n, p) * chol.transpose();
    const auto enc = continuous_encoding(raw, std::vector<std::size_t>(m, d));
    const auto results = test_all_pairs(enc, {});
    const Eigen::MatrixXd centered = raw.rowwise() - raw.colwise().mean();
    for (const auto& r : results) {
      std::vector<Eigen::Index> rest;
      for (std::size_t g = 0; g < m; ++g)
        if (g != r.i && g != r.j)
          for (std::size_t s = 0; s < d; ++s) rest.push_back(static_cast<Eigen::Index>(g * d + s));
      auto error = [&](std::size_t g) {
        const auto cols = Eigen::seqN(static_cast<Eigen::Index>(g * d), static_cast<Eigen::Index>(d));
        const Eigen::MatrixXd beta = sigma(rest, rest).ldlt().solve(sigma(rest, cols));
        return Eigen::MatrixXd(centered(Eigen::all, cols) - centered(Eigen::all, rest) * beta);
      };
      double t_oracle = 0.0;
      for (double r2 : oracle::canonical_r2(error(r.i), error(r.j)))
        t_oracle -= static_cast<double>(n) * std::log(1.0 - r2);
      const double gap = std::abs(r.statistic - t_oracle);
      worst = std::max(worst, gap / (0.05 * t_oracle + 0.5));
      within += gap <= 0.05 * t_oracle + 0.5;
      ++total;
    }
  }
  const double share = static_cast<double>(within) / static_cast<double>(total);
  return {share >= 0.9, fmt::format("{}/{} pairs ({:.1f}%) within 0.05*T_oracle + 0.5, need >= 90%; worst "
                                    "gap/allowance {:.3f}",
                                    within, total, 100 * share, worst)};
}

Outcome ac4_statistics() {
  std::mt19937_64 rng(404);
  // (a) canonical correlations against the SVD oracle.
  double worst_r2 = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index d1 = 1 + rep % 4, d2 = 1 + (rep / 4) % 5, n = 50 + 25 * (rep % 17);
    const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, n, d1);
    Eigen::MatrixXd e2 = oracle::gaussian_matrix(rng, n, d2);
    e2.col(0) += (0.1 * (rep % 7)) * e1.col(d1 - 1);
    const auto w = wilks_pair(e1, e2);
    const auto ref = oracle::canonical_r2(e1, e2);
    for (std::size_t k = 0; k < ref.size(); ++k)
      worst_r2 = std::max(worst_r2, std::abs(w.r2(static_cast<Eigen::Index>(k)) - ref[k]));
  }
  // (b) Cov(Q) against the four-index loop. Agreement is to rounding: the
  // library forms the same sums as a matrix product.
  double worst_q = 0.0;
  for (Eigen::Index d1 = 1; d1 <= 3; ++d1)
    for (Eigen::Index d2 = 1; d2 <= 3; ++d2)
      for (Eigen::Index n : {10, 30, 50}) {
        const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, n, d1);
        const Eigen::MatrixXd e2 = oracle::gaussian_matrix(rng, n, d2).array().cube().matrix();
        const auto w = wilks_pair(e1, e2);
        const Eigen::MatrixXd c = cov_q_hat(e1, e2, w.whiten_1, w.whiten_2);
        const Eigen::MatrixXd ref = oracle::four_index_cov_q(e1 * w.whiten_1, e2 * w.whiten_2);
        worst_q = std::max(worst_q, (c - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
      }
  // (c) tail against Monte Carlo, 1e7 draws per weight vector.
  std::uniform_real_distribution<double> uw(0.05, 3.0);
  std::uniform_int_distribution<int> ud(1, 8);
  std::normal_distribution<double> z;
  double worst_se = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> weights(static_cast<std::size_t>(ud(rng)));
    for (double& w : weights) w = uw(rng);
    const WeightedChiSq dist(weights);
    const double x = dist.mean() + 1.5 * std::sqrt(dist.variance());
    const long draws = 10'000'000;
    long above = 0;
    for (long k = 0; k < draws; ++k) {
      double q = 0.0;
      for (double w : weights) {
        const double v = z(rng);
        q += w * v * v;
      }
      above += q > x;
    }
    const double p_mc = static_cast<double>(above) / static_cast<double>(draws);
    const double se = std::sqrt(p_mc * (1.0 - p_mc) / static_cast<double>(draws));
    worst_se = std::max(worst_se, std::abs(weighted_chisq_tail(dist, x) - p_mc) / se);
  }
  double worst_unit = 0.0;
  for (int df = 1; df <= 12; ++df) {
    const double x = boost::math::quantile(boost::math::complement(boost::math::chi_squared(df), 0.05));
    worst_unit = std::max(worst_unit,
                          std::abs(weighted_chisq_tail(WeightedChiSq(std::vector<double>(df, 1.0)), x) - 0.05));
  }
  const bool pass = worst_r2 <= 1e-8 && worst_q <= 1e-12 && worst_se <= 3.0 && worst_unit < 1e-3;
  return {pass, fmt::format("(a) max |dr2| {:.2e} (<= 1e-8); (b) max rel Cov(Q) diff {:.2e} (<= 1e-12); "
                            "(c) max |dp|/SE {:.2f} (<= 3), unit-weight |dp| at p=0.05 {:.2e} (< 1e-3)",
                            worst_r2, worst_q, worst_se, worst_unit)};
}

Outcome ac5_group_lasso() {
  double worst_kkt = 0.0;
  std::size_t fits = 0, unconverged = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    LatentGaussianDesign d;
    d.u = 4, d.h = 3, d.n = 1000, d.r = 0.5, d.seed = seed, d.cut_quantiles = {0.25, 0.5, 0.75};
    const auto enc = encode_alignment(latent_gaussian_generator(d));
    const GroupPenaltySpec spec;
    const auto cache = one_vs_rest_all(enc, spec);
    const std::size_t m = enc.num_groups();
    for (std::size_t i = 0; i < m; ++i) {
      if (!cache.fits[i].converged) {
        ++unconverged;
        continue;
      }
      std::vector<ColumnRange> groups;
      std::vector<std::size_t> sizes;
      for (std::size_t g = 0; g < m; ++g)
        if (g != i) {
          groups.push_back(enc.groups[g]);
          sizes.push_back(enc.group_size(g));
        }
      const auto lambdas = lambda_schedule(sizes, enc.group_size(i), enc.num_rows(), spec, m - 1);
      worst_kkt = std::max(worst_kkt, kkt_check(cache.fits[i], Eigen::MatrixXd(enc.block(i)), enc.x, groups, lambdas));
      ++fits;
    }
  }
  // Least squares at lambda = 0.
  std::mt19937_64 rng(55);
  double worst_ls = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto groups = consecutive({2, 3, 1, 4});
    const Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(10, 10) + 0.3 * oracle::gaussian_matrix(rng, 10, 10);
    const Eigen::MatrixXd x = oracle::standardize(oracle::gaussian_matrix(rng, 300, 10) * mix);
    Eigen::MatrixXd y = x.leftCols(3) * oracle::gaussian_matrix(rng, 3, 2) + oracle::gaussian_matrix(rng, 300, 2);
    y.rowwise() -= y.colwise().mean();
    FitOptions opts;
    opts.tol = 1e-10;
    opts.max_iter = 20000;
    const auto fit = fit_multivariate_group_lasso(y, x, groups, std::vector<double>(4, 0.0), opts);
    worst_ls = std::max(worst_ls, (fit.coef - oracle::least_squares(x, y)).cwiseAbs().maxCoeff());
  }
  // Full shrinkage on orthonormal designs: B = 0 iff every ||X_g^T Y / N|| <= lambda_g.
  std::size_t threshold_cases = 0, threshold_wrong = 0;
  for (int rep = 0; rep < 40; ++rep) {
    Eigen::MatrixXd a = oracle::gaussian_matrix(rng, 120, 6);
    a.rowwise() -= a.colwise().mean();
    const Eigen::MatrixXd x = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                              Eigen::MatrixXd::Identity(120, 6) * std::sqrt(120.0);
    Eigen::MatrixXd y = oracle::gaussian_matrix(rng, 120, 2);
    y.rowwise() -= y.colwise().mean();
    const auto groups = consecutive({2, 1, 3});
    std::vector<double> norms;
    for (const auto& g : groups)
      norms.push_back((x.middleCols(static_cast<Eigen::Index>(g.begin), static_cast<Eigen::Index>(g.size)).transpose() *
                       y / 120.0)
                          .norm());
    // Lambdas straddle the norms: some exactly at, some just below.
    std::vector<double> lambdas(norms);
    if (rep % 2) lambdas[static_cast<std::size_t>(rep % 3)] *= 1.0 - 1e-9;
    FitOptions opts;
    opts.tol = 1e-12;
    const auto fit = fit_multivariate_group_lasso(y, x, groups, lambdas, opts);
    bool all_below = true;
    for (std::size_t g = 0; g < groups.size(); ++g) all_below = all_below && norms[g] <= lambdas[g];
    ++threshold_cases;
    threshold_wrong += (fit.coef.cwiseAbs().maxCoeff() == 0.0) != all_below;
  }
  const bool pass = worst_kkt <= 1e-5 && unconverged == 0 && worst_ls <= 1e-6 && threshold_wrong == 0;
  return {pass, fmt::format("KKT max {:.2e} over {} converged fits ({} unconverged); lambda=0 vs LS {:.2e}; "
                            "threshold mismatches {}/{}",
                            worst_kkt, fits, unconverged, worst_ls, threshold_wrong, threshold_cases)};
}

// Independent columns, so every pair is null.
Outcome ac6_aa_calibration() {
  std::size_t big = 0, total = 0, sign_failures = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    LatentGaussianDesign d;
    d.u = 10, d.h = 1, d.n = 5000, d.r = 0.0, d.seed = seed, d.cut_quantiles = {0.2, 0.45, 0.7};
    const auto enc = encode_alignment(latent_gaussian_generator(d));
    const auto cache = one_vs_rest_all(enc, {});
    for (std::size_t i = 0; i < enc.num_groups(); ++i)
      for (std::size_t j = i + 1; j < enc.num_groups(); ++j) {
        const auto aa = aa_pair_matrix(cache, enc, i, j);
        for (Eigen::Index a = 0; a < aa.z.rows(); ++a)
          for (Eigen::Index b = 0; b < aa.z.cols(); ++b) {
            if (std::isnan(aa.z(a, b))) continue;
            ++total;
            big += std::abs(aa.z(a, b)) > 1.96;
          }
        const auto res = pair_residuals(cache, enc, i, j);
        Eigen::MatrixXd flipped = res.e_j;
        flipped.col(0) = -flipped.col(0);
        const auto base = normalized_partial_corr(res.e_i, res.e_j);
        const auto neg = normalized_partial_corr(res.e_i, flipped);
        for (Eigen::Index a = 0; a < base.z.rows(); ++a)
          for (Eigen::Index b = 0; b < base.z.cols(); ++b) {
            const double expect = b == 0 ? -base.z(a, b) : base.z(a, b);
            sign_failures += !(neg.z(a, b) == expect) && !std::isnan(expect);
          }
      }
  }
  const double share = static_cast<double>(big) / static_cast<double>(total);
  return {share >= 0.03 && share <= 0.07 && sign_failures == 0,
          fmt::format("|z| > 1.96 on {:.4f} of {} null entries (need [0.03, 0.07]); sign-flip mismatches {}", share,
                      total, sign_failures)};
}

// Sum over a < b of C_ab(s_a, s_b) and over ordered (a, b) of the row sums,
// straight from the blocks.
std::pair<double, double> brute_scores(const std::string& s, const PartialCovMap& map) {
  const std::size_t m = map.num_groups();
  std::vector<int> idx(m, -1);
  for (std::size_t g = 0; g < m; ++g) {
    const auto pos = map.residues[g].find(s[map.positions[g]]);
    if (pos != std::string::npos) idx[g] = static_cast<int>(pos);
  }
  double c = 0.0, mm = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b || idx[a] < 0) continue;
      const Eigen::MatrixXd block = map.matrix(a, b);
      if (a < b && idx[b] >= 0) c += block(idx[a], idx[b]);
      for (Eigen::Index y = 0; y < block.cols(); ++y) mm += block(idx[a], y);
    }
  return {c, mm};
}

Outcome ac7_features() {
  FamilyDesign d;
  d.m = 15, d.n = 600, d.seed = 7;
  const auto a = synthetic_family(d);
  const auto enc = encode_alignment(a);
  const auto cache = one_vs_rest_all(enc, {});
  const auto map = partial_cov_map(cache, enc);
  const std::string wt = a.sequences.front();
  const auto [c0, m0] = brute_scores(wt, map);
  std::mt19937_64 rng(77);
  double worst = 0.0, scale = 0.0;
  std::size_t exact = 0;
  const std::size_t count = 1000;
  for (std::size_t k = 0; k < count; ++k) {
    std::string mut = wt;
    std::size_t g = 0;
    char res = 0;
    do {
      g = rng() % map.num_groups();
      res = map.residues[g][rng() % map.residues[g].size()];
    } while (res == wt[map.positions[g]]);
    mut[map.positions[g]] = res;
    const auto row = delta_feature({"m", mut, {}}, wt, map);
    const auto [c1, m1] = brute_scores(mut, map);
    const double dc = std::abs(row.delta_c - (c1 - c0)), dm = std::abs(row.delta_m - (m1 - m0));
    worst = std::max({worst, dc, dm});
    scale = std::max({scale, std::abs(c1), std::abs(m1)});
    exact += dc == 0.0 && dm == 0.0;
  }
  const auto self = delta_feature({"wt", wt, {}}, wt, map);
  // Brute force and the local sum add the same terms in different orders,
  // so agreement is to rounding of the full sums.
  const bool pass = worst <= 1e-12 * std::max(1.0, scale) && self.delta_c == 0.0 && self.delta_m == 0.0;
  return {pass, fmt::format("{} single mutants: max |local - brute| {:.2e} (scale {:.2f}, {} bit-identical); "
                            "wild type ({}, {})",
                            count, worst, scale, exact, self.delta_c, self.delta_m)};
}

Outcome ac8_baselines() {
  std::size_t pairs = 0, violations = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    FamilyDesign d;
    d.m = 15, d.n = 800, d.seed = seed;
    const auto enc = encode_alignment(synthetic_family(d));
    const auto cache = one_vs_rest_all(enc, {});
    for (std::size_t i = 0; i < enc.num_groups(); ++i)
      for (std::size_t j = i + 1; j < enc.num_groups(); ++j) {
        const auto res = pair_residuals(cache, enc, i, j);
        const auto l2 = l2_statistic(res.e_i, res.e_j);
        const auto linf = linf_statistic(res.e_i, res.e_j);
        ++pairs;
        violations += !(linf.max_sq <= l2.statistic);
      }
  }
  double worst_gumbel = 0.0;
  for (double x = -10.0; x <= 40.0; x += 0.01) {
    const double closed = std::exp(-std::exp(-x / 2.0) / std::sqrt(8.0 * std::numbers::pi));
    worst_gumbel = std::max(worst_gumbel, std::abs(gumbel_cdf(x) - closed));
  }
  FamilyDesign d;
  d.m = 20, d.n = 800, d.seed = 4;
  const auto enc = encode_alignment(synthetic_family(d));
  const auto est = graphical_lasso(enc, 0.01);
  std::size_t asym = 0;
  for (std::size_t i = 0; i < enc.num_groups(); ++i)
    for (std::size_t j = 0; j < enc.num_groups(); ++j)
      asym += psicov_score(est, enc.groups, i, j) != psicov_score(est, enc.groups, j, i);
  return {violations == 0 && worst_gumbel <= 1e-9 && asym == 0,
          fmt::format("Linf > L2 on {}/{} pairs; Gumbel max diff {:.2e} (<= 1e-9); psicov asymmetric pairs {}",
                      violations, pairs, worst_gumbel, asym)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1_type1},     {"AC2", ac2_power},           {"AC3", ac3_oracle},   {"AC4", ac4_statistics},
      {"AC5", ac5_group_lasso}, {"AC6", ac6_aa_calibration}, {"AC7", ac7_features}, {"AC8", ac8_baselines}};
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("{} {}: {} [{:.1f} s]\n", name, o.pass ? "PASS" : "FAIL", o.detail, secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
