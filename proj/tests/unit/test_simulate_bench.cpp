#include <doctest.h>

#include <map>
#include <sstream>

#include "catparc/bench.hpp"
#include "catparc/error.hpp"
#include "catparc/simulate.hpp"

using namespace catparc;

namespace {

std::map<char, int> histogram(const Alignment& a, std::size_t col) {
  std::map<char, int> h;
  for (const auto& s : a.sequences) ++h[s[col]];
  return h;
}

std::vector<std::string> group_rows(const Alignment& a, std::size_t begin, std::size_t h) {
  std::vector<std::string> rows;
  for (const auto& s : a.sequences) rows.push_back(s.substr(begin, h));
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST_SUITE("simulate_bench") {
  TEST_CASE("group permutation keeps column histograms and within-group rows") {
    LatentGaussianDesign d;
    d.u = 3, d.h = 2, d.n = 200, d.r = 0.5, d.seed = 4;
    const auto a = latent_gaussian_generator(d);
    const auto p = permute_groups(a, 3, 2, 11);
    REQUIRE(p.num_positions() == 6);
    for (std::size_t c = 0; c < 6; ++c) CHECK(histogram(a, c) == histogram(p, c));
    for (std::size_t g = 0; g < 3; ++g) CHECK(group_rows(a, 2 * g, 2) == group_rows(p, 2 * g, 2));
    CHECK(p.sequences != a.sequences);
    CHECK(permute_groups(a, 3, 2, 11).sequences == p.sequences);
  }

  TEST_CASE("one group is a plain row shuffle") {
    const auto a = make_alignment({"ACD", "CDE", "DEF", "EFG"});
    const auto p = permute_groups(a, 1, 3, 2);
    auto x = a.sequences, y = p.sequences;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(x == y);
    CHECK_THROWS_AS(permute_groups(a, 2, 2, 1), InputError);
  }

  TEST_CASE("latent generator shapes and validation") {
    LatentGaussianDesign d;
    d.u = 2, d.h = 3, d.n = 50, d.cut_quantiles = {0.5};
    const auto a = latent_gaussian_generator(d);
    CHECK(a.num_sequences() == 50);
    CHECK(a.num_positions() == 6);
    for (const auto& s : a.sequences) CHECK(s.find_first_not_of("AC") == std::string::npos);
    d.r = -0.9;
    CHECK_THROWS_AS(latent_gaussian_generator(d), InputError);
  }

  TEST_CASE("multinomial draws follow the table") {
    MultinomialDesign d;
    d.u = 2, d.h = 2, d.n = 4000, d.seed = 3;
    d.tables = {{{"AC", "CA"}, {0.25, 0.75}}};
    const auto a = multinomial_generator(d);
    int ac = 0;
    for (const auto& s : a.sequences) {
      CHECK((s.substr(0, 2) == "AC" || s.substr(0, 2) == "CA"));
      ac += s.substr(2, 2) == "AC";
    }
    CHECK(std::abs(ac / 4000.0 - 0.25) < 0.03);
    d.tables[0].probabilities = {0.5, 0.6};
    CHECK_THROWS_AS(multinomial_generator(d), InputError);
  }

  TEST_CASE("synthetic family") {
    FamilyDesign d;
    d.m = 12, d.n = 300, d.seed = 9;
    const auto a = synthetic_family(d);
    CHECK(a.num_positions() == 12);
    CHECK(a.num_sequences() == 300);
    CHECK(synthetic_family(d).sequences == a.sequences);
  }

  TEST_CASE("group truth") {
    const auto t = group_truth(2, 3);
    CHECK(t.size() == 15);
    int pos = 0;
    for (const auto& p : t) {
      CHECK(p.i < p.j);
      CHECK(p.positive == (p.i / 3 == p.j / 3));
      pos += p.positive;
    }
    CHECK(pos == 6);
  }

  TEST_CASE("perfect and reversed rankings") {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    const std::vector<bool> l{true, true, false, false};
    CHECK(auc(roc_curve(s, l)) == 1.0);
    CHECK(auc(roc_curve(s, l, false)) == 0.0);
    const auto c = roc_curve(s, l);
    CHECK(c.fpr.front() == 0.0);
    CHECK(c.tpr.back() == 1.0);
    CHECK(c.auc == auc(c));
  }

  TEST_CASE("auc against the Mann-Whitney count") {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8, 0.4, 0.2, 0.9};
    const std::vector<bool> l{false, true, false, true, false, true, false};
    double wins = 0.0, total = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = 0; b < s.size(); ++b)
        if (l[a] && !l[b]) {
          total += 1.0;
          wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
        }
    CHECK(auc(roc_curve(s, l)) == doctest::Approx(wins / total).epsilon(1e-14));
    // Strictly increasing transforms leave the AUC alone.
    std::vector<double> t;
    for (double x : s) t.push_back(std::exp(3 * x) - 7.0);
    CHECK(auc(roc_curve(t, l)) == auc(roc_curve(s, l)));
  }

  TEST_CASE("all-tied scores give one half") {
    CHECK(auc(roc_curve({1, 1, 1, 1}, {true, false, true, false})) == doctest::Approx(0.5));
  }

  TEST_CASE("a single class is rejected") {
    CHECK_THROWS_AS(roc_curve({1, 2}, {true, true}), InputError);
    CHECK_THROWS_AS(roc_curve({1}, {true, false}), InputError);
  }

  TEST_CASE("rates at a level") {
    const std::vector<double> p{0.01, 0.2, 0.04, 0.5, std::nan("")};
    const std::vector<bool> l{true, true, false, false, false};
    const auto r = rate_at_level(p, l, 0.05);
    CHECK(r.power == doctest::Approx(0.5));
    CHECK(r.type1 == doctest::Approx(0.5));
  }

  TEST_CASE("median of identical curves is the curve on the grid") {
    // Four negatives put every FPR step on the 201-point grid.
    const auto c = roc_curve({0.9, 0.5, 0.4, 0.1, 0.3, 0.2}, {true, false, true, false, false, false});
    const auto m = median_roc({c, c, c}, 201);
    // Curve: (0, 1/2) to (1/4, 1/2), up to (1/4, 1), then flat.
    CHECK(m.tpr[1] == 0.5);
    CHECK(m.tpr[50] == 0.5);
    CHECK(m.tpr[51] == 1.0);
    CHECK(m.tpr.back() == 1.0);
    // Resampling turns the vertical step into one grid cell of slope.
    CHECK(std::abs(m.auc - c.auc) <= 0.5 / 200.0 + 1e-12);
    // The grid plus a second point at FPR 0.
    CHECK(m.fpr.size() == 202);
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  }

  TEST_CASE("joining rankings with truth") {
    const std::vector<TruthPair> truth{{0, 1, true}, {0, 2, false}, {1, 2, false}};
    const std::vector<RankingRow> rows{{"X", 1, 0, 5.0, 0.01}, {"X", 0, 2, 1.0, 0.3}, {"X", 3, 4, 9.0, 0.0}};
    const auto j = join_truth(rows, truth);
    REQUIRE(j.scores.size() == 3);
    CHECK(j.scores[0] == 5.0);
    CHECK(std::isinf(j.scores[2]));
    CHECK(j.scores[2] < 0.0);
    const auto eval = evaluate_rankings(rows, truth, 0.05);
    CHECK(eval.at("X").auc == 1.0);
  }

  TEST_CASE("rankings and truth round trip") {
    const std::vector<RankingRow> rows{{"CATParc", 0, 3, 12.5, 1e-6}, {"MI", 2, 5, 0.25, std::nan("")}};
    std::stringstream buf;
    write_rankings_tsv(buf, rows);
    CHECK(buf.str().find("NA") != std::string::npos);
    const auto back = read_rankings_tsv(buf);
    REQUIRE(back.size() == 2);
    CHECK(back[0].method == "CATParc");
    CHECK(back[0].j == 3);
    CHECK(back[0].score == 12.5);
    CHECK(std::isnan(back[1].p_value));
    const auto truth = group_truth(2, 2);
    std::stringstream tb;
    write_truth_tsv(tb, truth);
    const auto t2 = read_truth_tsv(tb);
    REQUIRE(t2.size() == truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) {
      CHECK(t2[k].i == truth[k].i);
      CHECK(t2[k].positive == truth[k].positive);
    }
    std::istringstream bad("method\ti\tj\tscore\tp_value\nX\t1\tone\t2\tNA\n");
    CHECK_THROWS_AS(read_rankings_tsv(bad), FormatError);
  }

  TEST_CASE("uniform index stays in range and is reproducible") {
    Rng a(5), b(5);
    for (int k = 0; k < 1000; ++k) {
      const auto x = uniform_index(a, 7);
      CHECK(x < 7);
      CHECK(x == uniform_index(b, 7));
    }
    CHECK_THROWS_AS(uniform_index(a, 0), InputError);
  }
}
