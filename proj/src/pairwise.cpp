#include "catparc/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "catparc/error.hpp"
#include "catparc/linalg.hpp"
#include "catparc/parallel.hpp"
#include "catparc/bench.hpp"

namespace catparc {
namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// r^2 this close to 1 means the two residual blocks are collinear.
constexpr double kMaxR2 = 1.0 - 1e-12;

Eigen::MatrixXd residuals_of(const EncodedMatrix& enc, std::size_t response,
                             const FitResult& fit) {
  Eigen::MatrixXd e = enc.block(response);
  for (std::size_t g : fit.active_groups) {
    const auto& r = enc.groups[g];
    e.noalias() -= enc.block(g) * fit.coef.middleRows(idx(r.begin), idx(r.size));
  }
  return e;
}

FitResult fit_excluding(const ResidualCache& cache, const EncodedMatrix& enc,
                        std::size_t response, std::span<const std::size_t> excluded,
                        const Eigen::MatrixXd* warm) {
  const auto& design = *cache.design;
  const std::size_t m = enc.num_groups();
  std::vector<std::size_t> predictors, sizes;
  for (std::size_t g = 0; g < m; ++g) {
    if (std::find(excluded.begin(), excluded.end(), g) != excluded.end()) continue;
    predictors.push_back(g);
    sizes.push_back(enc.group_size(g));
  }
  const std::size_t d = enc.group_size(response);
  const auto lambdas = lambda_schedule(sizes, d, enc.num_rows(), cache.penalty,
                                       m - excluded.size());
  const auto& r = enc.groups[response];
  const Eigen::MatrixXd cross = design.gram().middleCols(idx(r.begin), idx(r.size));
  const double yy = cross.middleRows(idx(r.begin), idx(r.size)).trace();
  FitResult fit = fit_group_lasso_gram(design, cross, yy, predictors, lambdas,
                                       cache.fit_options, warm);
  fit.residuals = residuals_of(enc, response, fit);
  return fit;
}

}  // namespace

ResidualCache one_vs_rest_all(const EncodedMatrix& enc, const GroupPenaltySpec& spec,
                              const FitOptions& fit, unsigned threads) {
  const std::size_t m = enc.num_groups();
  if (m < 2)
    throw DegenerateDataError(fmt::format("need at least 2 encoded positions, have {}", m));
  ResidualCache cache;
  cache.design = std::make_shared<const GramDesign>(enc.x, enc.groups);
  cache.penalty = spec;
  cache.fit_options = fit;
  cache.fits.resize(m);
  cache.failures.assign(m, std::string());
  parallel_for(m, threads, [&](std::size_t i) {
    try {
      const std::size_t excluded[] = {i};
      cache.fits[i] = fit_excluding(cache, enc, i, excluded, nullptr);
      if (!cache.fits[i].converged)
        cache.failures[i] = fmt::format("one-vs-rest fit for column {} did not converge in {} sweeps",
                                        enc.positions[i] + 1, fit.max_iter);
    } catch (const Error& e) {
      cache.failures[i] = e.what();
    }
  });
  return cache;
}

TuneResult tune_c(const EncodedMatrix& enc, const GroupPenaltySpec& spec,
                  const TuneOptions& options, const FitOptions& fit) {
  const std::size_t m = enc.num_groups(), n = enc.num_rows();
  if (m < 2) throw DegenerateDataError("tune_c: need at least 2 encoded positions");
  if (options.grid.empty()) throw InputError("tune_c: empty C grid");
  if (options.folds < 2 || options.folds > n) throw InputError("tune_c: folds must lie in [2, N]");
  if (!(options.fraction > 0.0 && options.fraction <= 1.0))
    throw InputError("tune_c: fraction must lie in (0, 1]");
  Rng rng(options.seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t k = m; k > 1; --k) std::swap(order[k - 1], order[uniform_index(rng, k)]);
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(options.fraction * static_cast<double>(m))));
  TuneResult out;
  out.responses.assign(order.begin(), order.begin() + idx(count));
  std::sort(out.responses.begin(), out.responses.end());

  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t k = n; k > 1; --k) std::swap(rows[k - 1], rows[uniform_index(rng, k)]);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t k = 0; k < n; ++k) fold_of[rows[k]] = k % options.folds;

  struct Fold {
    Eigen::MatrixXd train, test;
    std::unique_ptr<GramDesign> design;
  };
  std::vector<Fold> folds(options.folds);
  for (std::size_t f = 0; f < options.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t r = 0; r < n; ++r) (fold_of[r] == f ? te : tr).push_back(idx(r));
    folds[f].train = enc.x(tr, Eigen::all);
    folds[f].test = enc.x(te, Eigen::all);
    folds[f].design = std::make_unique<GramDesign>(folds[f].train, enc.groups);
  }

  out.chosen.assign(count, options.grid.front());
  parallel_for(count, options.threads, [&](std::size_t k) {
    const std::size_t response = out.responses[k];
    std::vector<std::size_t> predictors, sizes;
    for (std::size_t g = 0; g < m; ++g)
      if (g != response) {
        predictors.push_back(g);
        sizes.push_back(enc.group_size(g));
      }
    const auto& r = enc.groups[response];
    double best = std::numeric_limits<double>::infinity();
    for (double c : options.grid) {
      GroupPenaltySpec trial = spec;
      trial.C = c;
      double error = 0.0;
      for (const auto& fold : folds) {
        const auto& design = *fold.design;
        const auto lambdas = lambda_schedule(sizes, r.size, design.num_rows(), trial, m - 1);
        const Eigen::MatrixXd cross = design.gram().middleCols(idx(r.begin), idx(r.size));
        const double yy = cross.middleRows(idx(r.begin), idx(r.size)).trace();
        const FitResult res = fit_group_lasso_gram(design, cross, yy, predictors, lambdas, fit);
        const Eigen::MatrixXd resid =
            fold.test.middleCols(idx(r.begin), idx(r.size)) - fold.test * res.coef;
        error += resid.squaredNorm();
      }
      if (error < best) {
        best = error;
        out.chosen[k] = c;
      }
    }
  });
  out.c = median(out.chosen);
  return out;
}

PairResiduals pair_residuals(const ResidualCache& cache, const EncodedMatrix& enc,
                             std::size_t i, std::size_t j) {
  if (i == j) throw InputError("pair_residuals: i and j must differ");
  if (i >= cache.num_groups() || j >= cache.num_groups())
    throw InputError("pair_residuals: group index out of range");
  PairResiduals out;
  const std::size_t excluded[] = {i, j};
  auto side = [&](std::size_t a, std::size_t b, Eigen::MatrixXd& e, bool& refit) {
    const FitResult& base = cache.fits[a];
    if (!base.is_active(b)) {
      e = base.residuals;
      return;
    }
    refit = true;
    FitResult fit = fit_excluding(cache, enc, a, excluded, &base.coef);
    out.converged = out.converged && fit.converged;
    e = std::move(fit.residuals);
  };
  side(i, j, out.e_i, out.refit_i);
  side(j, i, out.e_j, out.refit_j);
  return out;
}

WilksResult wilks_pair(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2) {
  if (e1.rows() != e2.rows()) throw InputError("wilks_pair: residual blocks differ in rows");
  if (e1.rows() == 0 || e1.cols() == 0 || e2.cols() == 0)
    throw InputError("wilks_pair: empty residual block");
  const double n = static_cast<double>(e1.rows());
  const Eigen::MatrixXd s11 = e1.transpose() * e1 / n;
  const Eigen::MatrixXd s22 = e2.transpose() * e2 / n;
  WilksResult out;
  out.s12 = e1.transpose() * e2 / n;
  const Whitener w1 = whiten_sym(s11, default_ridge(s11));
  const Whitener w2 = whiten_sym(s22, default_ridge(s22));
  out.rank_1 = w1.rank;
  out.rank_2 = w2.rank;
  out.ill_conditioned = (w1.rank > 0 && w1.min_retained < 1e-6 * s11.diagonal().maxCoeff()) ||
                        (w2.rank > 0 && w2.min_retained < 1e-6 * s22.diagonal().maxCoeff());
  const Eigen::MatrixXd k = w1.transform * out.s12 * w2.transform;
  const Eigen::MatrixXd inner =
      k.rows() <= k.cols() ? Eigen::MatrixXd(k * k.transpose()) : Eigen::MatrixXd(k.transpose() * k);
  out.r2 = sym_eig(inner).values;
  double log_sum = 0.0;
  for (Eigen::Index l = 0; l < out.r2.size(); ++l) {
    double& r = out.r2(l);
    r = std::max(r, 0.0);
    if (r > kMaxR2) {
      r = kMaxR2;
      out.clamped = true;
    }
    log_sum += std::log1p(-r);
  }
  out.statistic = std::max(0.0, -n * log_sum);
  out.whiten_1 = w1.transform;
  out.whiten_2 = w2.transform;
  return out;
}

Eigen::MatrixXd cov_q_hat(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2,
                          const Eigen::MatrixXd& whiten_1, const Eigen::MatrixXd& whiten_2) {
  if (e1.rows() != e2.rows()) throw InputError("cov_q_hat: residual blocks differ in rows");
  if (whiten_1.rows() != e1.cols() || whiten_2.rows() != e2.cols())
    throw InputError("cov_q_hat: whitening transform has the wrong size");
  const Eigen::MatrixXd y1 = e1 * whiten_1;
  const Eigen::MatrixXd y2 = e2 * whiten_2;
  const Eigen::Index d1 = y1.cols(), d2 = y2.cols();
  Eigen::MatrixXd products(y1.rows(), d1 * d2);
  for (Eigen::Index t1 = 0; t1 < d1; ++t1)
    for (Eigen::Index t2 = 0; t2 < d2; ++t2)
      products.col(t1 * d2 + t2) = y1.col(t1).cwiseProduct(y2.col(t2));
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d1 * d2, d1 * d2);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(products.transpose(),
                                                 1.0 / static_cast<double>(y1.rows()));
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov;
}

PairPValues pair_pvalue(double statistic, const WeightedChiSq& weights, double df,
                        TailMethod tail) {
  PairPValues out;
  out.p_chisq = df > 0.0 ? chisq_tail(df, statistic) : 1.0;
  out.p_weighted = weighted_chisq_tail(weights, statistic, tail);
  return out;
}

PairResult test_pair(const ResidualCache& cache, const EncodedMatrix& enc, std::size_t i,
                     std::size_t j, const PairwiseOptions& options) {
  if (enc.group_size(i) > enc.group_size(j) ||
      (enc.group_size(i) == enc.group_size(j) && i > j))
    std::swap(i, j);
  PairResult out;
  out.i = i;
  out.j = j;
  out.position_i = enc.positions[i];
  out.position_j = enc.positions[j];
  out.d_i = enc.group_size(i);
  out.d_j = enc.group_size(j);
  if (!cache.ok(i) || !cache.ok(j)) {
    out.failed = true;
    out.error = cache.ok(i) ? cache.failures[j] : cache.failures[i];
    return out;
  }
  try {
    const PairResiduals res = pair_residuals(cache, enc, i, j);
    out.refit_i = res.refit_i;
    out.refit_j = res.refit_j;
    if (!res.converged) {
      out.failed = true;
      out.error = "pairwise refit did not converge";
      return out;
    }
    const WilksResult w = wilks_pair(res.e_i, res.e_j);
    out.r2 = w.r2;
    out.statistic = w.statistic;
    out.df = static_cast<double>(w.rank_1 * w.rank_2);
    out.unstable = w.clamped || w.ill_conditioned;
    out.p_chisq = out.df > 0.0 ? chisq_tail(out.df, out.statistic) : 1.0;
    if (options.weighted || options.rank_by == PValueKind::weighted) {
      const auto spectrum = sym_eig(cov_q_hat(res.e_i, res.e_j, w.whiten_1, w.whiten_2));
      out.weights = WeightedChiSq::from_eigenvalues(spectrum.values);
      if (out.weights.conditioning_warnings() > 0) out.unstable = true;
      out.p_weighted = weighted_chisq_tail(out.weights, out.statistic, options.tail);
    }
  } catch (const Error& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

std::vector<PairResult> test_all_pairs(const EncodedMatrix& enc, const PairwiseOptions& options) {
  const ResidualCache cache = one_vs_rest_all(enc, options.penalty, options.fit, options.threads);
  return test_all_pairs(cache, enc, options);
}

std::vector<PairResult> test_all_pairs(const ResidualCache& cache, const EncodedMatrix& enc,
                                       const PairwiseOptions& options) {
  const std::size_t m = cache.num_groups();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(m * (m - 1) / 2);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
  std::vector<PairResult> results(pairs.size());
  parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
    results[k] = test_pair(cache, enc, pairs[k].first, pairs[k].second, options);
  });
  fill_bh(results, options.rank_by);
  sort_pair_results(results, options.rank_by);
  return results;
}

void fill_bh(std::vector<PairResult>& results, PValueKind rank_by) {
  std::vector<double> p(results.size());
  for (std::size_t k = 0; k < results.size(); ++k)
    p[k] = results[k].failed ? std::numeric_limits<double>::quiet_NaN()
                             : results[k].pvalue(rank_by);
  const auto adjusted = benjamini_hochberg(p);
  for (std::size_t k = 0; k < results.size(); ++k) results[k].bh_adj_p = adjusted[k];
}

void sort_pair_results(std::vector<PairResult>& results, PValueKind rank_by) {
  std::sort(results.begin(), results.end(), [rank_by](const PairResult& a, const PairResult& b) {
    if (a.failed != b.failed) return b.failed;
    const double pa = a.pvalue(rank_by), pb = b.pvalue(rank_by);
    if (std::isnan(pa) != std::isnan(pb)) return std::isnan(pb);
    if (pa != pb && !std::isnan(pa)) return pa < pb;
    if (a.statistic != b.statistic) return a.statistic > b.statistic;
    return std::pair(a.position_i, a.position_j) < std::pair(b.position_i, b.position_j);
  });
}

std::vector<std::pair<std::size_t, std::size_t>> recover_graph(
    const std::vector<PairResult>& results, double k, std::size_t m) {
  if (!(k > 0.0)) throw InputError("recover_graph: K must be positive");
  const double cut = k * std::log(static_cast<double>(std::max<std::size_t>(m, 1)));
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& r : results) {
    if (r.failed || !(r.statistic > 0.0) || r.statistic < cut) continue;
    edges.emplace_back(std::min(r.position_i, r.position_j), std::max(r.position_i, r.position_j));
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

void write_pair_tsv(std::ostream& out, const std::vector<PairResult>& results) {
  out << "i\tj\td_i\td_j\tT\tdf\tp_chisq\tp_weighted\trefit_i\trefit_j\tunstable\tbh_adj_p\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{:.10g}", v); };
  for (const auto& r : results) {
    if (r.failed) continue;
    fmt::print(out, "{}\t{}\t{}\t{}\t{:.10g}\t{:g}\t{}\t{}\t{:d}\t{:d}\t{:d}\t{}\n", r.position_i + 1,
               r.position_j + 1, r.d_i, r.d_j, r.statistic, r.df, num(r.p_chisq),
               num(r.p_weighted), r.refit_i, r.refit_j, r.unstable, num(r.bh_adj_p));
  }
}

}  // namespace catparc
