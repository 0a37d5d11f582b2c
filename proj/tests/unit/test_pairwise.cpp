#include <doctest.h>

#include <random>
#include <sstream>

#include "catparc/msa.hpp"
#include "catparc/pairwise.hpp"
#include "catparc/simulate.hpp"
#include "oracles.hpp"

using namespace catparc;

namespace {

EncodedMatrix latent(std::size_t u, std::size_t h, std::size_t n, double r, std::uint64_t seed,
                     std::vector<double> cuts = {1.0 / 3.0, 2.0 / 3.0}) {
  LatentGaussianDesign d;
  d.u = u, d.h = h, d.n = n, d.r = r, d.seed = seed, d.cut_quantiles = std::move(cuts);
  return encode_alignment(latent_gaussian_generator(d));
}

}  // namespace

TEST_SUITE("pairwise") {
  TEST_CASE("squared canonical correlations match the SVD oracle") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 30; ++rep) {
      const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, 200, 2);
      Eigen::MatrixXd e2 = oracle::gaussian_matrix(rng, 200, 3);
      e2.col(0) += 0.4 * e1.col(1);
      const auto w = wilks_pair(e1, e2);
      const auto ref = oracle::canonical_r2(e1, e2);
      REQUIRE(w.r2.size() == 2);
      for (int k = 0; k < 2; ++k) CHECK(std::abs(w.r2(k) - ref[static_cast<std::size_t>(k)]) < 1e-8);
      double t = 0.0;
      for (double r : ref) t -= 200.0 * std::log(1.0 - r);
      // The default ridge shifts r2 by about 1e-8 relative.
      CHECK(w.statistic == doctest::Approx(t).epsilon(1e-7));
      CHECK(w.rank_1 == 2);
      CHECK(w.rank_2 == 3);
    }
  }

  TEST_CASE("zero cross-covariance gives T = 0") {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(100, 2), e2 = Eigen::MatrixXd::Zero(100, 2);
    e1.topRows(50) = oracle::gaussian_matrix(rng, 50, 2);
    e2.bottomRows(50) = oracle::gaussian_matrix(rng, 50, 2);
    const auto w = wilks_pair(e1, e2);
    CHECK(w.statistic == 0.0);
    CHECK(w.r2.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("identical blocks give r2 just below one and a finite T") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd e = oracle::gaussian_matrix(rng, 80, 2);
    const auto w = wilks_pair(e, e);
    CHECK(w.r2.minCoeff() > 1.0 - 1e-6);
    CHECK(w.r2.maxCoeff() < 1.0);
    CHECK(std::isfinite(w.statistic));
    CHECK(w.statistic > 80.0 * 20.0);
  }

  TEST_CASE("cov_q_hat matches the four-index loop") {
    std::mt19937_64 rng(9);
    for (int d1 = 1; d1 <= 3; ++d1)
      for (int d2 = 1; d2 <= 3; ++d2) {
        const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, 50, d1);
        const Eigen::MatrixXd e2 = oracle::gaussian_matrix(rng, 50, d2).array().cube().matrix();
        const auto w = wilks_pair(e1, e2);
        const Eigen::MatrixXd c = cov_q_hat(e1, e2, w.whiten_1, w.whiten_2);
        const Eigen::MatrixXd ref = oracle::four_index_cov_q(e1 * w.whiten_1, e2 * w.whiten_2);
        CHECK((c - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
      }
  }

  TEST_CASE("gaussian residuals give Cov(Q) close to the identity") {
    std::mt19937_64 rng(10);
    const Eigen::MatrixXd e1 = oracle::gaussian_matrix(rng, 5000, 2), e2 = oracle::gaussian_matrix(rng, 5000, 2);
    const auto w = wilks_pair(e1, e2);
    const Eigen::MatrixXd c = cov_q_hat(e1, e2, w.whiten_1, w.whiten_2);
    const Eigen::MatrixXd off = c - Eigen::MatrixXd::Identity(4, 4);
    CHECK(off.cwiseAbs().maxCoeff() < 0.1);
  }

  TEST_CASE("p-values") {
    const auto zero = pair_pvalue(0.0, WeightedChiSq({1, 1, 1, 1}), 4);
    CHECK(zero.p_weighted == 1.0);
    CHECK(zero.p_chisq == 1.0);
    for (double t : {1.0, 5.0, 12.0}) {
      const auto p = pair_pvalue(t, WeightedChiSq({1, 1, 1, 1, 1, 1}), 6);
      CHECK(std::abs(p.p_weighted - p.p_chisq) < 1e-4);
    }
    const WeightedChiSq heavy({2.5, 1.0, 0.4, 0.1});
    double prev = 1.0;
    for (double t = 0.0; t < 40.0; t += 0.7) {
      const double p = pair_pvalue(t, heavy, 4).p_weighted;
      CHECK(p <= prev + 1e-12);
      prev = p;
    }
    // Unequal weights move the weighted p away from the chi-squared one.
    const auto p = pair_pvalue(10.0, heavy, 4);
    CHECK(std::abs(p.p_weighted - p.p_chisq) > 0.01);
  }

  TEST_CASE("two positions regress on an empty set") {
    const auto enc = latent(1, 2, 400, 0.5, 3);
    REQUIRE(enc.num_groups() == 2);
    const auto cache = one_vs_rest_all(enc, {});
    CHECK(cache.ok(0));
    CHECK(cache.ok(1));
    const auto res = pair_residuals(cache, enc, 0, 1);
    CHECK((res.e_i - enc.block(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((res.e_j - enc.block(1)).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("inactive block reuses the one-vs-rest residuals") {
    const auto enc = latent(3, 1, 500, 0.0, 8);
    const auto cache = one_vs_rest_all(enc, {2.0, 50.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(cache.fits[i].active_groups.empty());
    const auto res = pair_residuals(cache, enc, 0, 2);
    CHECK_FALSE(res.refit_i);
    CHECK_FALSE(res.refit_j);
    CHECK(res.e_i == cache.fits[0].residuals);
  }

  TEST_CASE("active block forces a refit with different residuals") {
    const auto enc = latent(1, 3, 800, 0.6, 12);
    const auto cache = one_vs_rest_all(enc, {});
    REQUIRE(cache.fits[0].is_active(1));
    const auto res = pair_residuals(cache, enc, 0, 1);
    CHECK(res.refit_i);
    CHECK(res.converged);
    CHECK((res.e_i - cache.fits[0].residuals).cwiseAbs().maxCoeff() > 1e-6);
    for (Eigen::Index c = 0; c < res.e_i.cols(); ++c) CHECK(std::abs(res.e_i.col(c).mean()) < 1e-8);
  }

  TEST_CASE("pair table: count, order, symmetry, determinism") {
    const auto enc = latent(2, 3, 600, 0.5, 21, {0.25, 0.5, 0.75});
    PairwiseOptions opts;
    opts.weighted = true;
    const auto cache = one_vs_rest_all(enc, opts.penalty);
    const auto results = test_all_pairs(cache, enc, opts);
    CHECK(results.size() == 15);
    for (std::size_t k = 0; k + 1 < results.size(); ++k) CHECK(results[k].p_chisq <= results[k + 1].p_chisq);
    for (const auto& r : results) {
      CHECK(r.d_i <= r.d_j);
      CHECK(r.statistic >= 0.0);
      CHECK(r.p_chisq >= 0.0);
      CHECK(r.p_chisq <= 1.0);
      CHECK(r.p_weighted >= 0.0);
      CHECK(r.p_weighted <= 1.0);
      CHECK(r.weights.size() == r.d_i * r.d_j);
      const auto swapped = test_pair(cache, enc, r.j, r.i, opts);
      CHECK(std::abs(swapped.statistic - r.statistic) <= 1e-10 * std::max(1.0, r.statistic));
      CHECK(std::abs(swapped.p_weighted - r.p_weighted) <= 1e-10);
    }
    opts.threads = 3;
    const auto again = test_all_pairs(enc, opts);
    REQUIRE(again.size() == results.size());
    for (std::size_t k = 0; k < results.size(); ++k) {
      CHECK(again[k].i == results[k].i);
      CHECK(again[k].j == results[k].j);
      CHECK(again[k].statistic == results[k].statistic);
    }
  }

  TEST_CASE("three positions give three pairs and cross-block pairs rank low") {
    const auto enc = latent(3, 1, 400, 0.0, 2);
    CHECK(test_all_pairs(enc, {}).size() == 3);
    const auto blocks = latent(3, 2, 1500, 0.7, 6);
    const auto results = test_all_pairs(blocks, {});
    // The three within-block pairs come first.
    for (std::size_t k = 0; k < 3; ++k) CHECK(results[k].position_i / 2 == results[k].position_j / 2);
  }

  TEST_CASE("graph recovery") {
    const auto enc = latent(3, 2, 1500, 0.7, 6);
    const auto results = test_all_pairs(enc, {});
    CHECK(recover_graph(results, 1e12, 6).empty());
    // Cut at 20 log 6 ~ 36, far in the tail of a 4-df null.
    const auto edges = recover_graph(results, 20.0, 6);
    REQUIRE(edges.size() == 3);
    for (auto [a, b] : edges) CHECK(a / 2 == b / 2);
    std::vector<PairResult> flat(2);
    CHECK(recover_graph(flat, 0.1, 4).empty());
  }

  TEST_CASE("tsv layout") {
    const auto enc = latent(1, 3, 200, 0.3, 1);
    std::ostringstream out;
    write_pair_tsv(out, test_all_pairs(enc, {}));
    std::string header;
    std::getline(std::istringstream(out.str()) >> std::ws, header);
    CHECK(header == "i\tj\td_i\td_j\tT\tdf\tp_chisq\tp_weighted\trefit_i\trefit_j\tunstable\tbh_adj_p");
    CHECK(out.str().find("NA") != std::string::npos);
  }

  TEST_CASE("tuning C picks from the grid") {
    const auto enc = latent(2, 3, 400, 0.5, 5);
    TuneOptions t;
    t.fraction = 0.5;
    const auto r = tune_c(enc, {}, t);
    CHECK(r.responses.size() == 3);
    CHECK(r.c >= t.grid.front());
    CHECK(r.c <= t.grid.back());
    for (double c : r.chosen) CHECK(std::find(t.grid.begin(), t.grid.end(), c) != t.grid.end());
    CHECK(tune_c(enc, {}, t).c == r.c);
  }
}
