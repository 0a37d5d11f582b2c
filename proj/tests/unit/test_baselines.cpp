#include <doctest.h>

#include <random>

#include "catparc/baselines.hpp"
#include "catparc/error.hpp"
#include "catparc/simulate.hpp"
#include "oracles.hpp"

using namespace catparc;

namespace {

// Dual of the graphical lasso: maximize log det W subject to |W - S| <= rho
// entrywise, by projected gradient ascent.
Eigen::MatrixXd glasso_dual(const Eigen::MatrixXd& s, double rho, int iters) {
  Eigen::MatrixXd w = s + rho * Eigen::MatrixXd::Identity(s.rows(), s.cols());
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd g = w.inverse();
    const double step = 0.5 / (g.norm() * g.norm());
    w += step * g;
    w = w.array().min(s.array() + rho).max(s.array() - rho).matrix();
    w = (w + w.transpose()) / 2.0;
  }
  return w.inverse();
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("mutual information by hand") {
    const auto copy2 = make_alignment({"AA", "CC", "AA", "CC"});
    CHECK(mutual_information(copy2, 0, 1, 0.0).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const auto copy4 = make_alignment({"AA", "CC", "DD", "EE"});
    CHECK(mutual_information(copy4, 0, 1, 0.0).value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    const auto indep = make_alignment({"AA", "AC", "CA", "CC"});
    CHECK(std::abs(mutual_information(indep, 0, 1, 0.0).value) < 1e-14);
    // Pseudocount 0.5 in each of the four cells: 1.5, 0.5, 0.5, 1.5 over 4.
    const double smoothed = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
    CHECK(mutual_information(make_alignment({"AA", "CC", "GT"}), 0, 1).value > 0.0);
    CHECK(mutual_information(make_alignment({"AA", "CC"}), 0, 1, 0.5).value ==
          doctest::Approx(smoothed).epsilon(1e-12));
  }

  TEST_CASE("mutual information skips gaps") {
    const auto a = make_alignment({"A-", "-C", "AC", "CA"});
    const auto mi = mutual_information(a, 0, 1, 0.0);
    CHECK(mi.rows_used == 2);
    const auto none = mutual_information(make_alignment({"A-", "-C"}), 0, 1);
    CHECK(none.no_overlap);
    CHECK(none.value == 0.0);
    CHECK(mutual_information(a, 0, 1).value >= 0.0);
  }

  TEST_CASE("2x2 graphical lasso closed form") {
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.6, 0.6, 2.0;
    const double rho = 0.2;
    const auto est = graphical_lasso(s, rho, 1e-10, 500);
    Eigen::MatrixXd w(2, 2);
    w << 1.2, 0.4, 0.4, 2.2;
    CHECK((est.omega - w.inverse()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(est.converged);
    const auto sparse = graphical_lasso(s, 0.7, 1e-10, 500);
    CHECK(std::abs(sparse.omega(0, 1)) < 1e-10);
    CHECK(sparse.omega(0, 0) == doctest::Approx(1.0 / 1.7).epsilon(1e-8));
  }

  TEST_CASE("5x5 graphical lasso matches the projected-gradient dual") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 3; ++rep) {
      const Eigen::MatrixXd x = oracle::gaussian_matrix(rng, 40, 5);
      const Eigen::MatrixXd s = x.transpose() * x / 40.0;
      const double rho = 0.1;
      const auto est = graphical_lasso(s, rho, 1e-10, 2000);
      const Eigen::MatrixXd ref = glasso_dual(s, rho, 200000);
      CHECK((est.omega - ref).cwiseAbs().maxCoeff() < 1e-4);
      CHECK(glasso_optimality_gap(est.omega, s, rho) < 1e-6);
      CHECK((est.omega - est.omega.transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("psicov block score") {
    PrecisionEstimate est;
    est.omega = Eigen::MatrixXd::Ones(5, 5);
    const std::vector<ColumnRange> groups{{0, 2}, {2, 3}};
    CHECK(psicov_score(est, groups, 0, 1) == 6.0);
    est.omega(0, 3) = -2.0;
    est.omega(3, 0) = -2.0;
    CHECK(psicov_score(est, groups, 0, 1) == 7.0);
    CHECK(psicov_score(est, groups, 1, 0) == psicov_score(est, groups, 0, 1));
    CHECK_THROWS_AS(psicov_score(est, groups, 0, 2), InputError);
  }

  TEST_CASE("l-infinity never exceeds l2") {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, 100, 1 + rep % 3);
      Eigen::MatrixXd e2 = oracle::gaussian_matrix(rng, 100, 2 + rep % 2);
      e2.col(0) += 0.2 * e1.col(0);
      const auto l2 = l2_statistic(e1, e2);
      const auto linf = linf_statistic(e1, e2);
      CHECK(linf.max_sq <= l2.statistic + 1e-12);
      CHECK(l2.p_value >= 0.0);
      CHECK(l2.p_value <= 1.0);
      CHECK_FALSE(linf.missing);
      CHECK(linf.p_value == doctest::Approx(gumbel_tail(linf.statistic)));
    }
  }

  TEST_CASE("zero cross-covariance gives a zero statistic") {
    // Columns whose centered products average to zero exactly.
    Eigen::MatrixXd e1(4, 1), e2(4, 2);
    e1 << 1, -1, 1, -1;
    e2 << 1, 1, 1, 1, -1, -1, -1, -1;
    e2.col(1) << 1, 1, -1, -1;
    const auto l2 = l2_statistic(e1, e2);
    CHECK(std::abs(l2.statistic) < 1e-28);
    CHECK(l2.p_value == doctest::Approx(1.0));
  }

  TEST_CASE("single columns: l2 is z squared and l-infinity is missing") {
    std::mt19937_64 rng(7);
    const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, 200, 1), e2 = oracle::gaussian_matrix(rng, 200, 1);
    const auto snc = self_normalized_cross_cov(e1, e2);
    const auto l2 = l2_statistic(e1, e2);
    CHECK(l2.statistic == doctest::Approx(snc.s_check(0, 0) * snc.s_check(0, 0)).epsilon(1e-12));
    CHECK(l2.p_value == doctest::Approx(chisq_tail(1, l2.statistic)).epsilon(1e-6));
    const auto linf = linf_statistic(e1, e2);
    CHECK(linf.missing);
    CHECK(std::isnan(linf.statistic));
  }

  TEST_CASE("self-normalized entries by hand") {
    std::mt19937_64 rng(8);
    const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, 30, 2), e2 = oracle::gaussian_matrix(rng, 30, 2);
    const auto snc = self_normalized_cross_cov(e1, e2);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const Eigen::VectorXd x = e1.col(a).array() - e1.col(a).mean();
        const Eigen::VectorXd y = e2.col(b).array() - e2.col(b).mean();
        const Eigen::VectorXd prod = x.cwiseProduct(y);
        const double sigma = prod.mean();
        const double theta = (prod.array() - sigma).square().sum() / (30.0 * 30.0);
        CHECK(snc.s_check(a, b) == doctest::Approx(sigma / std::sqrt(theta)).epsilon(1e-12));
      }
  }

  TEST_CASE("ranking rows for every method") {
    LatentGaussianDesign d;
    d.u = 2, d.h = 2, d.n = 300, d.r = 0.6, d.seed = 3;
    const auto a = latent_gaussian_generator(d);
    const auto enc = encode_alignment(a);
    const auto cache = one_vs_rest_all(enc, {});
    const auto rows = baseline_rankings(a, enc, cache, {});
    std::map<std::string, int> count;
    for (const auto& r : rows) {
      ++count[r.method];
      CHECK(r.i < r.j);
    }
    CHECK(count["MI"] == 6);
    CHECK(count["PSICOV"] == 6);
    CHECK(count["L2"] == 6);
    CHECK(count["Linf"] == 6);
    PairwiseOptions opts;
    const auto cat = catparc_rankings(test_all_pairs(cache, enc, opts));
    CHECK(cat.size() == 6);
    for (const auto& r : cat) CHECK(r.score == doctest::Approx(-std::log(r.p_value)).epsilon(1e-6));
  }
}
