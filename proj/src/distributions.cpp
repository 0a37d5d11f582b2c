#include "catparc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "catparc/error.hpp"

namespace catparc {
namespace {

using cplx = std::complex<double>;

// Contour nodes for the fixed-Talbot inversion. Roundoff grows as
// exp(2M/5) * eps and truncation shrinks as 10^(-0.6 M); two node counts are
// compared to detect a contour the transform oscillates too fast on.
constexpr int kTalbotNodes = 32;
constexpr int kTalbotCheckNodes = 24;
constexpr double kTalbotAgreement = 1e-9;

cplx complex_expm1(cplx z) {
  const double a = z.real(), b = z.imag();
  const double s = std::sin(0.5 * b);
  return {std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b)};
}

cplx log_transform(const std::vector<double>& w, cplx s) {
  cplx log_l = 0.0;
  for (double wk : w) log_l -= 0.5 * std::log(1.0 + 2.0 * wk * s);
  return log_l;
}

// Laplace transform of the survival function of sum w W^2:
// (1 - prod (1 + 2 w s)^(-1/2)) / s.
cplx survival_transform(const std::vector<double>& w, cplx s) {
  return -complex_expm1(log_transform(w, s)) / s;
}

double talbot_survival(const std::vector<double>& w, double x, int nodes) {
  const double r = 2.0 * nodes / (5.0 * x);
  double acc = 0.5 * std::exp(r * x) * survival_transform(w, cplx(r, 0.0)).real();
  for (int k = 1; k < nodes; ++k) {
    const double theta = k * std::numbers::pi / nodes;
    const double cot = std::cos(theta) / std::sin(theta);
    const cplx s(r * theta * cot, r * theta);
    const double sigma = theta + (theta * cot - 1.0) * cot;
    acc += (std::exp(s * x) * survival_transform(w, s) * cplx(1.0, sigma)).real();
  }
  return r / nodes * acc;
}

// Bromwich inversion of L(s)/s along Re s = c through (or near) the saddle
// point of exp(s x) L(s), by the trapezoidal rule. For c > 0 the line sits
// right of the pole at 0 and yields the CDF; for c in (-1/(2 w_max), 0) it
// yields minus the survival function. Needs fast decay of |L| along the
// line, i.e. many effective weights; used when the Talbot check fails.
double saddle_line_survival(const std::vector<double>& w, double x) {
  double mean = 0.0, sq = 0.0;
  for (double wk : w) {
    mean += wk;
    sq += wk * wk;
  }
  const double sd = std::sqrt(2.0 * sq);
  const double branch = -0.5 / w.front();
  auto slope = [&](double c) {
    double v = 0.0;
    for (double wk : w) v += wk / (1.0 + 2.0 * wk * c);
    return v - x;
  };
  // Saddle: x = sum w / (1 + 2 w c), decreasing in c on (branch, inf).
  double lo = branch * (1.0 - 1e-12), hi = 1.0;
  while (slope(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  double c = 0.5 * (lo + hi);
  const bool cdf_side = x <= mean;
  if (cdf_side) {
    c = std::max(c, 1.0 / sd);
  } else {
    c = std::max(std::min(c, -1.0 / sd), 0.5 * branch);
  }
  const double strip = std::min(std::abs(c), c - branch);
  const double h = 2.0 * std::numbers::pi * strip / 40.0;

  auto integrand = [&](double u) {
    const cplx s(c, u);
    return (std::exp(s * x + log_transform(w, s)) / s).real();
  };
  auto magnitude = [&](double u) {
    const cplx s(c, u);
    return std::exp(c * x + log_transform(w, s).real()) / std::abs(s);
  };
  const double peak = magnitude(0.0);
  double acc = 0.5 * integrand(0.0);
  constexpr long kMaxNodes = 4'000'000;
  for (long k = 1; k < kMaxNodes; ++k) {
    const double u = static_cast<double>(k) * h;
    acc += integrand(u);
    if (magnitude(u) < 1e-17 * std::max(1.0, peak)) break;
  }
  const double value = acc * h / std::numbers::pi;
  return cdf_side ? 1.0 - value : -value;
}

}  // namespace

WeightedChiSq::WeightedChiSq(std::vector<double> weights) : weights_(std::move(weights)) {
  for (double w : weights_)
    if (!std::isfinite(w) || w < 0.0)
      throw NumericError(fmt::format("weighted chi-squared weight {} is invalid", w));
  std::sort(weights_.begin(), weights_.end(), std::greater<>());
}

WeightedChiSq WeightedChiSq::from_eigenvalues(const Eigen::VectorXd& values) {
  if (!values.allFinite()) throw NumericError("non-finite covariance eigenvalue");
  const double top = values.size() ? std::max(0.0, values.maxCoeff()) : 0.0;
  std::vector<double> w;
  std::size_t warnings = 0;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    double v = values(k);
    if (v < 0.0) {
      if (v < -1e-8 * top) ++warnings;
      v = 0.0;
    }
    w.push_back(v);
  }
  WeightedChiSq out(std::move(w));
  out.conditioning_warnings_ = warnings;
  return out;
}

double WeightedChiSq::mean() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

double WeightedChiSq::variance() const {
  double v = 0.0;
  for (double w : weights_) v += 2.0 * w * w;
  return v;
}

double satterthwaite_tail(const WeightedChiSq& w, double x) {
  const double mu = w.mean();
  if (!(mu > 0.0)) return x <= 0.0 ? 1.0 : 0.0;
  double sq = 0.0;
  for (double wk : w.weights()) sq += wk * wk;
  const double scale = sq / mu;
  const double df = mu * mu / sq;
  return chisq_tail(df, x / scale);
}

double weighted_chisq_tail(const WeightedChiSq& w, double x, TailMethod method) {
  if (std::isnan(x)) throw NumericError("weighted_chisq_tail: NaN argument");
  std::vector<double> positive;
  for (double wk : w.weights())
    if (wk > 0.0) positive.push_back(wk);
  if (x <= 0.0) return 1.0;
  if (positive.empty()) return 0.0;
  if (std::isinf(x)) return 0.0;
  if (method == TailMethod::satterthwaite) return satterthwaite_tail(w, x);
  // Rescale so the largest weight is 1; the tail is invariant under
  // (w, x) -> (c w, c x).
  const double top = positive.front();
  for (double& wk : positive) wk /= top;
  const double scaled = x / top;
  double p = talbot_survival(positive, scaled, kTalbotNodes);
  const double check = talbot_survival(positive, scaled, kTalbotCheckNodes);
  if (!(std::abs(p - check) <= kTalbotAgreement)) p = saddle_line_survival(positive, scaled);
  return std::clamp(p, 0.0, 1.0);
}

double weighted_chisq_quantile(const WeightedChiSq& w, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw NumericError(fmt::format("quantile level {} outside (0, 1)", alpha));
  if (!(w.mean() > 0.0)) return 0.0;
  double lo = 0.0;
  double hi = w.mean() + 10.0 * std::sqrt(w.variance()) + 1.0;
  while (weighted_chisq_tail(w, hi) > alpha) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (weighted_chisq_tail(w, mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double chisq_tail(double df, double x) {
  if (!(df > 0.0)) throw NumericError(fmt::format("chi-squared df must be positive, got {}", df));
  if (std::isnan(x)) throw NumericError("chisq_tail: NaN argument");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double log_chisq_tail(double df, double x) {
  const double p = chisq_tail(df, x);
  if (p > 1e-280) return std::log(p);
  // Asymptotic expansion of the upper incomplete gamma Q(a, y).
  const double a = 0.5 * df, y = 0.5 * x;
  double term = 1.0, series = 1.0;
  for (int k = 1; k < 8; ++k) {
    term *= (a - k) / y;
    series += term;
  }
  return (a - 1.0) * std::log(y) - y - std::lgamma(a) + std::log(series);
}

double gumbel_cdf(double x) {
  if (std::isnan(x)) throw NumericError("gumbel_cdf: NaN argument");
  return std::exp(-std::exp(-0.5 * x) / std::sqrt(8.0 * std::numbers::pi));
}

double gumbel_tail(double x) {
  if (std::isnan(x)) throw NumericError("gumbel_tail: NaN argument");
  return -std::expm1(-std::exp(-0.5 * x) / std::sqrt(8.0 * std::numbers::pi));
}

double normal_two_sided(double z) {
  if (std::isnan(z)) throw NumericError("normal_two_sided: NaN argument");
  return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

std::vector<double> benjamini_hochberg(std::span<const double> pvalues) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < pvalues.size(); ++k)
    if (!std::isnan(pvalues[k])) order.push_back(k);
  std::vector<double> adjusted(pvalues.size(), std::numeric_limits<double>::quiet_NaN());
  const double family = static_cast<double>(order.size());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  double running = 1.0;
  for (std::size_t r = order.size(); r-- > 0;) {
    const double v = pvalues[order[r]] * family / static_cast<double>(r + 1);
    running = std::min(running, v);
    adjusted[order[r]] = std::min(1.0, running);
  }
  return adjusted;
}

}  // namespace catparc
