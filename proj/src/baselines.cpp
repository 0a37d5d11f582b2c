#include "catparc/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "catparc/error.hpp"
#include "catparc/linalg.hpp"
#include "catparc/parallel.hpp"

namespace catparc {
namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

int symbol_index(char c) {
  const auto p = kResidues.find(c);
  return p == std::string_view::npos ? -1 : static_cast<int>(p);
}

}  // namespace

MutualInformation mutual_information(const Alignment& a, std::size_t i, std::size_t j,
                                     double pseudocount) {
  if (i >= a.num_positions() || j >= a.num_positions())
    throw InputError(fmt::format("mutual_information: column out of range ({}, {})", i, j));
  if (!(pseudocount >= 0.0)) throw InputError("mutual_information: pseudocount must be >= 0");
  std::array<std::array<double, 20>, 20> counts{};
  std::array<bool, 20> seen_i{}, seen_j{};
  MutualInformation out;
  for (std::size_t k = 0; k < a.num_sequences(); ++k) {
    const int x = symbol_index(a.at(k, i)), y = symbol_index(a.at(k, j));
    if (x < 0 || y < 0) continue;
    counts[x][y] += 1.0;
    seen_i[x] = seen_j[y] = true;
    ++out.rows_used;
  }
  if (out.rows_used == 0) {
    out.no_overlap = true;
    return out;
  }
  std::vector<int> rows_i, rows_j;
  for (int r = 0; r < 20; ++r) {
    if (seen_i[r]) rows_i.push_back(r);
    if (seen_j[r]) rows_j.push_back(r);
  }
  const double total = static_cast<double>(out.rows_used) +
                       pseudocount * static_cast<double>(rows_i.size() * rows_j.size());
  std::vector<double> pi(rows_i.size(), 0.0), pj(rows_j.size(), 0.0);
  for (std::size_t x = 0; x < rows_i.size(); ++x)
    for (std::size_t y = 0; y < rows_j.size(); ++y) {
      const double p = (counts[rows_i[x]][rows_j[y]] + pseudocount) / total;
      pi[x] += p;
      pj[y] += p;
    }
  double mi = 0.0;
  for (std::size_t x = 0; x < rows_i.size(); ++x)
    for (std::size_t y = 0; y < rows_j.size(); ++y) {
      const double p = (counts[rows_i[x]][rows_j[y]] + pseudocount) / total;
      if (p > 0.0) mi += p * std::log(p / (pi[x] * pj[y]));
    }
  out.value = std::max(0.0, mi);
  return out;
}

PrecisionEstimate graphical_lasso(const Eigen::MatrixXd& s, double rho, double tol, int max_iter) {
  if (s.rows() != s.cols() || s.rows() == 0) throw InputError("graphical_lasso: S must be square");
  if (!s.allFinite()) throw NumericError("graphical_lasso: non-finite covariance");
  if (!(rho > 0.0)) throw InputError("graphical_lasso: rho must be positive");
  const Eigen::Index p = s.rows();
  PrecisionEstimate est;
  est.rho = rho;
  Eigen::MatrixXd w = s;
  w.diagonal().array() += rho;
  // beta.col(j) holds the lasso coefficients of column j (entry j unused).
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(p, p);
  double off_scale = 0.0;
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b)
      if (a != b) off_scale += std::abs(s(a, b));
  off_scale = p > 1 ? off_scale / static_cast<double>(p * (p - 1)) : 1.0;
  if (!(off_scale > 0.0)) off_scale = 1.0;

  Eigen::VectorXd v(p);
  for (est.iterations = 1; est.iterations <= max_iter; ++est.iterations) {
    double change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      // v = W11 beta, kept for all rows; row j is ignored.
      v.noalias() = w * beta.col(j);
      for (int inner = 0; inner < 1000; ++inner) {
        double biggest = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
          if (k == j) continue;
          const double old = beta(k, j);
          const double r = s(k, j) - (v(k) - w(k, k) * old);
          const double next = soft_threshold(r, rho) / w(k, k);
          const double delta = next - old;
          if (delta != 0.0) {
            beta(k, j) = next;
            v += w.col(k) * delta;
            biggest = std::max(biggest, std::abs(delta));
          }
        }
        if (biggest < 1e-3 * tol * off_scale) break;
      }
      for (Eigen::Index k = 0; k < p; ++k) {
        if (k == j) continue;
        change += std::abs(w(k, j) - v(k));
        w(k, j) = w(j, k) = v(k);
      }
    }
    change /= static_cast<double>(std::max<Eigen::Index>(1, p * (p - 1)));
    if (change < tol * off_scale) {
      est.converged = true;
      break;
    }
  }
  est.iterations = std::min(est.iterations, max_iter);
  est.omega.resize(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double dot = 0.0;
    for (Eigen::Index k = 0; k < p; ++k)
      if (k != j) dot += w(k, j) * beta(k, j);
    const double diag = 1.0 / (w(j, j) - dot);
    for (Eigen::Index k = 0; k < p; ++k) est.omega(k, j) = k == j ? diag : -beta(k, j) * diag;
  }
  est.omega = 0.5 * (est.omega + est.omega.transpose()).eval();
  est.covariance = w;
  est.kkt = glasso_optimality_gap(est.omega, s, rho);
  return est;
}

PrecisionEstimate graphical_lasso(const EncodedMatrix& enc, double rho, double tol, int max_iter) {
  const Eigen::MatrixXd s = enc.x.transpose() * enc.x / static_cast<double>(enc.num_rows());
  return graphical_lasso(s, rho, tol, max_iter);
}

double glasso_optimality_gap(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& s, double rho) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(omega);
  if (ldlt.info() != Eigen::Success) throw NumericError("glasso_optimality_gap: factorization failed");
  const Eigen::MatrixXd w = ldlt.solve(Eigen::MatrixXd::Identity(omega.rows(), omega.cols()));
  const double zero = 1e-12 * omega.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index a = 0; a < omega.rows(); ++a)
    for (Eigen::Index b = 0; b < omega.cols(); ++b) {
      const double g = w(a, b) - s(a, b);
      const double o = omega(a, b);
      worst = std::max(worst, std::abs(o) > zero ? std::abs(g - rho * (o > 0 ? 1.0 : -1.0))
                                                 : std::max(0.0, std::abs(g) - rho));
    }
  return worst;
}

double psicov_score(const PrecisionEstimate& est, const std::vector<ColumnRange>& groups,
                    std::size_t i, std::size_t j) {
  if (i >= groups.size() || j >= groups.size()) throw InputError("psicov_score: bad group index");
  // Always sum the upper block so (i, j) and (j, i) add in the same order.
  const auto& a = groups[std::min(i, j)];
  const auto& b = groups[std::max(i, j)];
  if (std::max(a.end(), b.end()) > static_cast<std::size_t>(est.omega.rows()))
    throw InputError("psicov_score: groups do not match the precision matrix");
  return est.omega.block(idx(a.begin), idx(b.begin), idx(a.size), idx(b.size)).cwiseAbs().sum();
}

SelfNormalizedCrossCov self_normalized_cross_cov(const Eigen::MatrixXd& e1,
                                                 const Eigen::MatrixXd& e2) {
  if (e1.rows() != e2.rows() || e1.rows() == 0)
    throw InputError("self_normalized_cross_cov: blocks must share a nonzero row count");
  const double n = static_cast<double>(e1.rows());
  const Eigen::MatrixXd a = e1.rowwise() - e1.colwise().mean();
  const Eigen::MatrixXd b = e2.rowwise() - e2.colwise().mean();
  const Eigen::Index d1 = a.cols(), d2 = b.cols();
  SelfNormalizedCrossCov out;
  out.s_check = Eigen::MatrixXd::Zero(d1, d2);
  out.theta = Eigen::MatrixXd::Zero(d1, d2);
  out.centered_products.resize(a.rows(), d1 * d2);
  for (Eigen::Index t1 = 0; t1 < d1; ++t1)
    for (Eigen::Index t2 = 0; t2 < d2; ++t2) {
      auto col = out.centered_products.col(t1 * d2 + t2);
      col = a.col(t1).cwiseProduct(b.col(t2));
      const double sigma = col.mean();
      col.array() -= sigma;
      const double theta = col.squaredNorm() / (n * n);
      out.theta(t1, t2) = theta;
      const double scale = a.col(t1).squaredNorm() * b.col(t2).squaredNorm() / (n * n * n);
      if (!(theta > 1e-14 * scale) || !(scale > 0.0)) {
        out.excluded.emplace_back(static_cast<std::size_t>(t1), static_cast<std::size_t>(t2));
        col.setZero();
        continue;
      }
      out.s_check(t1, t2) = sigma / std::sqrt(theta);
    }
  return out;
}

L2Result l2_statistic(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2, TailMethod tail) {
  const auto snc = self_normalized_cross_cov(e1, e2);
  const double n = static_cast<double>(e1.rows());
  const Eigen::Index d1 = snc.s_check.rows(), d2 = snc.s_check.cols();
  L2Result out;
  out.excluded = snc.excluded.size();
  out.statistic = snc.s_check.squaredNorm();
  // Correlation of the entries: cov of centered products over N^2, scaled
  // by the entry standard errors.
  Eigen::VectorXd inv_sd(d1 * d2);
  for (Eigen::Index t1 = 0; t1 < d1; ++t1)
    for (Eigen::Index t2 = 0; t2 < d2; ++t2) {
      const double theta = snc.theta(t1, t2);
      const bool dropped = snc.centered_products.col(t1 * d2 + t2).isZero(0.0);
      inv_sd(t1 * d2 + t2) = dropped ? 0.0 : 1.0 / std::sqrt(theta);
    }
  const Eigen::MatrixXd cov = snc.centered_products.transpose() * snc.centered_products / (n * n);
  const Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  out.weights = WeightedChiSq::from_eigenvalues(sym_eig(corr).values);
  out.p_value = weighted_chisq_tail(out.weights, out.statistic, tail);
  const double sd = std::sqrt(out.weights.variance());
  out.standardized = sd > 0.0 ? (out.statistic - out.weights.mean()) / sd : 0.0;
  return out;
}

LinfResult linf_statistic(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2) {
  LinfResult out;
  const auto snc = self_normalized_cross_cov(e1, e2);
  out.max_sq = snc.s_check.size() ? snc.s_check.cwiseAbs2().maxCoeff() : 0.0;
  const double d2 = static_cast<double>(std::max(e1.cols(), e2.cols()));
  if (d2 < 2.0) return out;
  out.missing = false;
  out.statistic = out.max_sq - 4.0 * std::log(d2) + std::log(std::log(d2));
  out.p_value = gumbel_tail(out.statistic);
  return out;
}

std::vector<RankingRow> baseline_rankings(const Alignment& a, const EncodedMatrix& enc,
                                          const ResidualCache& cache,
                                          const BaselineOptions& options) {
  const std::size_t m = enc.num_groups();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = x + 1; y < m; ++y) pairs.emplace_back(x, y);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<RankingRow> mi_rows, psicov_rows;
  if (options.mi) {
    mi_rows.resize(pairs.size());
    parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
      const auto [x, y] = pairs[k];
      const auto mi = mutual_information(a, enc.positions[x], enc.positions[y],
                                         options.mi_pseudocount);
      mi_rows[k] = {"MI", enc.positions[x], enc.positions[y], mi.value, nan};
    });
  }
  if (options.psicov) {
    const auto est = graphical_lasso(enc, options.glasso_rho, options.glasso_tol,
                                     options.glasso_max_iter);
    for (const auto& [x, y] : pairs)
      psicov_rows.push_back({"PSICOV", enc.positions[x], enc.positions[y],
                             psicov_score(est, enc.groups, x, y), nan});
  }
  std::vector<RankingRow> l2_rows, linf_rows;
  if (options.l2 || options.linf) {
    std::vector<std::optional<L2Result>> l2(pairs.size());
    std::vector<std::optional<LinfResult>> linf(pairs.size());
    parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
      const auto [x, y] = pairs[k];
      if (!cache.ok(x) || !cache.ok(y)) return;
      const auto res = pair_residuals(cache, enc, x, y);
      if (!res.converged) return;
      if (options.l2) l2[k] = l2_statistic(res.e_i, res.e_j, options.tail);
      if (options.linf) linf[k] = linf_statistic(res.e_i, res.e_j);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const std::size_t pi = enc.positions[pairs[k].first], pj = enc.positions[pairs[k].second];
      if (l2[k]) l2_rows.push_back({"L2", pi, pj, l2[k]->standardized, l2[k]->p_value});
      if (linf[k])
        linf_rows.push_back({"Linf", pi, pj, linf[k]->statistic, linf[k]->p_value});
    }
  }
  std::vector<RankingRow> out;
  for (auto* rows : {&mi_rows, &psicov_rows, &l2_rows, &linf_rows})
    out.insert(out.end(), rows->begin(), rows->end());
  return out;
}

std::vector<RankingRow> catparc_rankings(const std::vector<PairResult>& results,
                                         const std::string& method) {
  std::vector<RankingRow> out;
  for (const auto& r : results) {
    if (r.failed) continue;
    const double score = r.df > 0.0 ? -log_chisq_tail(r.df, r.statistic) : 0.0;
    out.push_back({method, std::min(r.position_i, r.position_j),
                   std::max(r.position_i, r.position_j), score, r.p_chisq});
  }
  return out;
}

}  // namespace catparc
