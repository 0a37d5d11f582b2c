#include "catparc/group_lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "catparc/error.hpp"
#include "catparc/linalg.hpp"

namespace catparc {
namespace {

constexpr double kRankTol = 1e-10;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Solves sum_k c_k / (gamma_k t + lambda)^2 = 1 for t = ||B_g|| > 0, where
// c_k are squared row norms of the rotated partial gradient. The function
// 1 / sqrt(sum ...) is increasing and close to linear in t, so Newton on it
// converges in a handful of steps; the bracket guards the rest.
double secular_root(const Eigen::VectorXd& gamma, const Eigen::VectorXd& c, double lambda,
                    double norm_c, double guess) {
  const double excess = norm_c - lambda;
  double lo = excess / gamma.maxCoeff();
  double hi = excess / gamma.minCoeff();
  double t = std::clamp(guess, lo, hi);
  if (!(t > 0.0)) t = lo;
  for (int it = 0; it < 100; ++it) {
    double s = 0.0, ds = 0.0;
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
      const double den = gamma(k) * t + lambda;
      s += c(k) / (den * den);
      ds -= 2.0 * c(k) * gamma(k) / (den * den * den);
    }
    const double h = 1.0 / std::sqrt(s) - 1.0;
    if (h == 0.0) return t;
    (h < 0.0 ? lo : hi) = t;
    const double dh = -0.5 * ds / (s * std::sqrt(s));
    double next = t - h / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * t) return next;
    t = next;
  }
  return t;
}

}  // namespace

std::vector<double> lambda_schedule(std::span<const std::size_t> group_sizes,
                                    std::size_t d_resp, std::size_t n,
                                    const GroupPenaltySpec& spec, std::size_t num_groups) {
  if (n == 0) throw InputError("lambda_schedule: N must be positive");
  if (!(spec.C >= 0.0) || !(spec.A >= 0.0))
    throw InputError(fmt::format("lambda_schedule: invalid constants A={} C={}", spec.A, spec.C));
  const double g = static_cast<double>(num_groups ? num_groups : group_sizes.size());
  const double nn = static_cast<double>(n);
  const double shared = g > 1.0 ? std::sqrt(spec.A * std::log(g) / nn) : 0.0;
  std::vector<double> out;
  out.reserve(group_sizes.size());
  for (std::size_t d : group_sizes)
    out.push_back(spec.C * (std::sqrt(static_cast<double>(d * d_resp) / nn) + shared));
  return out;
}

bool FitResult::is_active(std::size_t group) const {
  return std::binary_search(active_groups.begin(), active_groups.end(), group);
}

GramDesign::GramDesign(const Eigen::MatrixXd& x, std::vector<ColumnRange> groups)
    : groups_(std::move(groups)), n_(static_cast<std::size_t>(x.rows())) {
  if (n_ == 0) throw InputError("GramDesign: design has no rows");
  for (const auto& r : groups_)
    if (r.end() > static_cast<std::size_t>(x.cols()) || r.size == 0)
      throw InputError("GramDesign: group range outside the design");
  gram_ = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(n_));
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
  spectra_.reserve(groups_.size());
  for (const auto& r : groups_) {
    const auto block = gram_.block(idx(r.begin), idx(r.begin), idx(r.size), idx(r.size));
    auto spec = sym_eig(block);
    BlockSpectrum out;
    const double top = std::max(spec.values(0), 0.0);
    if (!(spec.values.minCoeff() > kRankTol * top))
      out.ridge = std::max(default_ridge(block), 1e-12);
    out.values = spec.values.cwiseMax(0.0);
    out.vectors = std::move(spec.vectors);
    spectra_.push_back(std::move(out));
  }
}

FitResult fit_group_lasso_gram(const GramDesign& design, const Eigen::MatrixXd& cross,
                               double yy, std::span<const std::size_t> predictors,
                               std::span<const double> lambdas, const FitOptions& options,
                               const Eigen::MatrixXd* warm) {
  const auto& gram = design.gram();
  const auto& groups = design.groups();
  const Eigen::Index dim = gram.rows();
  const Eigen::Index q = cross.cols();
  if (cross.rows() != dim) throw InputError("group lasso: cross-product has wrong row count");
  if (predictors.size() != lambdas.size())
    throw InputError("group lasso: one lambda per predictor group is required");
  if (!(options.tol > 0.0)) throw InputError("group lasso: tol must be positive");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw InputError("group lasso: lambda must be >= 0");

  FitResult fit;
  fit.coef = Eigen::MatrixXd::Zero(dim, q);
  if (warm) {
    if (warm->rows() != dim || warm->cols() != q)
      throw InputError("group lasso: warm start has wrong shape");
    for (std::size_t g : predictors) {
      const auto& r = groups[g];
      fit.coef.middleRows(idx(r.begin), idx(r.size)) = warm->middleRows(idx(r.begin), idx(r.size));
    }
  }
  for (std::size_t g : predictors)
    if (design.spectrum(g).ridge > 0.0) ++fit.ridge_blocks;

  Eigen::MatrixXd gb(dim, q);
  std::vector<double> norms(predictors.size());
  auto refresh = [&] {
    gb.setZero();
    for (std::size_t p = 0; p < predictors.size(); ++p) {
      const auto& r = groups[predictors[p]];
      const auto b = fit.coef.middleRows(idx(r.begin), idx(r.size));
      norms[p] = b.norm();
      if (norms[p] > 0.0) gb.noalias() += gram.middleCols(idx(r.begin), idx(r.size)) * b;
    }
  };
  auto objective = [&] {
    double value = 0.5 * yy;
    for (std::size_t p = 0; p < predictors.size(); ++p) {
      if (norms[p] == 0.0) continue;
      const auto& r = groups[predictors[p]];
      const auto b = fit.coef.middleRows(idx(r.begin), idx(r.size));
      const auto rows = Eigen::seqN(idx(r.begin), idx(r.size));
      value += (b.cwiseProduct(0.5 * gb(rows, Eigen::all) - cross(rows, Eigen::all))).sum() +
               lambdas[p] * norms[p];
    }
    return value;
  };
  auto kkt = [&] {
    double worst = 0.0;
    for (std::size_t p = 0; p < predictors.size(); ++p) {
      const auto& r = groups[predictors[p]];
      const auto rows = Eigen::seqN(idx(r.begin), idx(r.size));
      const Eigen::MatrixXd grad = cross(rows, Eigen::all) - gb(rows, Eigen::all);
      if (norms[p] > 0.0) {
        const auto b = fit.coef.middleRows(idx(r.begin), idx(r.size));
        worst = std::max(worst, (grad - lambdas[p] / norms[p] * b).norm());
      } else {
        worst = std::max(worst, std::max(0.0, grad.norm() - lambdas[p]));
      }
    }
    return worst;
  };

  refresh();
  double previous = objective();
  Eigen::MatrixXd partial, rotated, update;
  for (fit.iterations = 1; fit.iterations <= options.max_iter; ++fit.iterations) {
    double max_change = 0.0;
    for (std::size_t p = 0; p < predictors.size(); ++p) {
      const auto& r = groups[predictors[p]];
      const auto& spec = design.spectrum(predictors[p]);
      const double lambda = lambdas[p];
      auto b = fit.coef.middleRows(idx(r.begin), idx(r.size));
      const auto rows = Eigen::seqN(idx(r.begin), idx(r.size));
      const auto gram_gg = gram.block(idx(r.begin), idx(r.begin), idx(r.size), idx(r.size));
      // Gradient of the smooth part with block g removed: X_g^T R_g / N.
      partial = cross(rows, Eigen::all) - gb(rows, Eigen::all);
      if (norms[p] > 0.0) partial.noalias() += gram_gg * b;
      rotated.noalias() = spec.vectors.transpose() * partial;

      update.resize(idx(r.size), q);
      const double norm_partial = partial.norm();
      // Rounding in the cross products can push a block that sits exactly on the
      // threshold a few ulps over it; such a block is zero.
      const double slack =
          16.0 * std::numeric_limits<double>::epsilon() *
          (cross(rows, Eigen::all).norm() + gb(rows, Eigen::all).norm() + lambda);
      if (lambda == 0.0) {
        // Unpenalized: minimum-norm solution via the pseudo-inverse.
        const double cut = kRankTol * spec.values(0);
        for (Eigen::Index k = 0; k < rotated.rows(); ++k) {
          if (spec.values(k) > cut)
            update.row(k) = rotated.row(k) / spec.values(k);
          else
            update.row(k).setZero();
        }
      } else if (norm_partial <= lambda + slack) {
        update.setZero();
      } else {
        const Eigen::VectorXd gamma = spec.values.array() + spec.ridge;
        const Eigen::VectorXd c = rotated.rowwise().squaredNorm();
        const double t = secular_root(gamma, c, lambda, norm_partial, norms[p]);
        for (Eigen::Index k = 0; k < rotated.rows(); ++k)
          update.row(k) = rotated.row(k) * (t / (gamma(k) * t + lambda));
      }
      Eigen::MatrixXd next = spec.vectors * update;
      const Eigen::MatrixXd delta = next - b;
      const double delta_norm = delta.norm();
      if (delta_norm > 0.0) {
        gb.noalias() += gram.middleCols(idx(r.begin), idx(r.size)) * delta;
        b = next;
      }
      const double next_norm = next.norm();
      max_change = std::max(max_change, delta_norm / std::max(1.0, next_norm));
      norms[p] = next_norm;
    }
    // Recompute G B from scratch once per sweep so rounding cannot drift.
    refresh();
    const double current = objective();
    const double decrease = previous - current;
    previous = current;
    if (max_change <= options.tol && decrease <= options.tol * std::max(1.0, std::abs(current))) {
      fit.kkt = kkt();
      if (fit.kkt <= options.tol) {
        fit.converged = true;
        break;
      }
    }
  }
  fit.iterations = std::min(fit.iterations, options.max_iter);
  if (!fit.converged) fit.kkt = kkt();
  fit.objective = previous;
  for (std::size_t p = 0; p < predictors.size(); ++p)
    if (norms[p] > 0.0) fit.active_groups.push_back(predictors[p]);
  std::sort(fit.active_groups.begin(), fit.active_groups.end());
  return fit;
}

FitResult fit_multivariate_group_lasso(const Eigen::MatrixXd& y, const Eigen::MatrixXd& xp,
                                       const std::vector<ColumnRange>& groups,
                                       std::span<const double> lambdas,
                                       const FitOptions& options) {
  if (y.rows() != xp.rows())
    throw InputError(fmt::format("group lasso: Y has {} rows but X has {}", y.rows(), xp.rows()));
  if (lambdas.size() != groups.size())
    throw InputError("group lasso: one lambda per predictor group is required");
  const double n = static_cast<double>(y.rows());
  if (xp.cols() == 0 || groups.empty()) {
    FitResult fit;
    fit.coef = Eigen::MatrixXd::Zero(xp.cols(), y.cols());
    fit.residuals = y;
    fit.objective = 0.5 * y.squaredNorm() / n;
    fit.converged = true;
    return fit;
  }
  const GramDesign design(xp, groups);
  const Eigen::MatrixXd cross = xp.transpose() * y / n;
  std::vector<std::size_t> predictors(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) predictors[g] = g;
  FitResult fit =
      fit_group_lasso_gram(design, cross, y.squaredNorm() / n, predictors, lambdas, options);
  fit.residuals = y - xp * fit.coef;
  return fit;
}

double kkt_check(const FitResult& fit, const Eigen::MatrixXd& y, const Eigen::MatrixXd& xp,
                 const std::vector<ColumnRange>& groups, std::span<const double> lambdas) {
  if (lambdas.size() != groups.size())
    throw InputError("kkt_check: one lambda per predictor group is required");
  const double n = static_cast<double>(y.rows());
  const Eigen::MatrixXd resid =
      fit.residuals.size() == y.size() ? fit.residuals : Eigen::MatrixXd(y - xp * fit.coef);
  double worst = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& r = groups[g];
    const Eigen::MatrixXd grad = xp.middleCols(idx(r.begin), idx(r.size)).transpose() * resid / n;
    const auto b = fit.coef.middleRows(idx(r.begin), idx(r.size));
    const double norm = b.norm();
    if (norm > 0.0)
      worst = std::max(worst, (grad - lambdas[g] / norm * b).norm());
    else
      worst = std::max(worst, std::max(0.0, grad.norm() - lambdas[g]));
  }
  return worst;
}

}  // namespace catparc
