#include <cmath>

#include "doctest.h"
#include "tonematch/common.hpp"
#include "tonematch/stats.hpp"

using namespace tonematch;

TEST_CASE("preference probability exact anchors") {
  CHECK(std::fabs(preference_prob(13, 0, 20) - 0.65) <= 1e-12);
  CHECK(std::fabs(preference_prob(6, 0, 20) - 0.30) <= 1e-12);
  CHECK(std::fabs(preference_prob(10, 0, 20) - 0.50) <= 1e-12);
  // ties split evenly: (8 + 4/2) / 20 = 0.5
  CHECK(std::fabs(preference_prob(8, 4, 20) - 0.50) <= 1e-12);
}

TEST_CASE("preference probability validates inputs") {
  CHECK_THROWS_AS(preference_prob(-1, 0, 20), DataError);
  CHECK_THROWS_AS(preference_prob(15, 10, 20), DataError);  // w + t > n
  CHECK_THROWS_AS(preference_prob(0, 0, 0), DataError);
}

TEST_CASE("binomial cdf anchors") {
  CHECK(std::fabs(binomial_cdf(13, 20, 0.5) - 0.9423) <= 5e-5);
  CHECK(std::fabs(binomial_cdf(6, 20, 0.5) - 0.0577) <= 5e-5);
  CHECK(binomial_cdf(20, 20, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(binomial_cdf(10, 10, 0.3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(binomial_cdf(0, 10, 0.5) == doctest::Approx(std::pow(0.5, 10)).epsilon(1e-12));
}

TEST_CASE("binomial cdf equals a direct summation oracle") {
  // sum_{i<=k} C(n,i) p^i (1-p)^(n-i), accumulated in double
  const auto direct = [](int k, int n, double p) {
    double acc = 0.0;
    for (int i = 0; i <= k; ++i) {
      double c = 1.0;
      for (int j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
      acc += c * std::pow(p, i) * std::pow(1.0 - p, n - i);
    }
    return acc;
  };
  for (int n : {5, 12, 20, 33}) {
    for (int k = 0; k <= n; k += 3) {
      CHECK(std::fabs(binomial_cdf(k, n, 0.5) - direct(k, n, 0.5)) <= 1e-10);
      CHECK(std::fabs(binomial_cdf(k, n, 0.2) - direct(k, n, 0.2)) <= 1e-10);
    }
  }
}

TEST_CASE("significance thresholds at n=20") {
  const SignificanceThresholds th = significance_thresholds(20);
  CHECK(th.favored_at == 13);
  CHECK(th.disfavored_at == 6);
}

TEST_CASE("verdicts at the documented boundaries") {
  VoteRecord v;
  v.scene_id = "s";
  v.category = SceneCategory::kIndoor;
  v.n = 20;

  v.wins_ours = 13;
  v.ties = 0;
  CHECK(significance(v) == Verdict::kFavored);
  v.wins_ours = 12;
  CHECK(significance(v) == Verdict::kInconclusive);
  v.wins_ours = 10;
  CHECK(significance(v) == Verdict::kInconclusive);
  v.wins_ours = 7;
  CHECK(significance(v) == Verdict::kInconclusive);
  v.wins_ours = 6;
  CHECK(significance(v) == Verdict::kDisfavored);
}

TEST_CASE("thresholds are symmetric for a range of n") {
  for (int n = 5; n <= 40; ++n) {
    const SignificanceThresholds th = significance_thresholds(n);
    CHECK(th.disfavored_at == n - th.favored_at - 1);
    CHECK(th.favored_at > n / 2);
  }
}

TEST_CASE("category names round-trip") {
  for (SceneCategory c :
       {SceneCategory::kHumans, SceneCategory::kDarkNoisy, SceneCategory::kIndoor,
        SceneCategory::kStructures, SceneCategory::kLandscapes}) {
    CHECK(category_from_name(category_name(c)) == c);
  }
  CHECK_THROWS_AS(category_from_name("unknown-bucket"), DataError);
}

TEST_CASE("vote record validation") {
  VoteRecord v;
  v.scene_id = "s";
  v.category = SceneCategory::kHumans;
  v.wins_ours = 10;
  v.ties = 0;
  v.n = 20;
  v.validate();

  v.ties = 11;  // wins + ties > n
  CHECK_THROWS_AS(v.validate(), DataError);
  v.ties = 0;
  v.n = 0;
  CHECK_THROWS_AS(v.validate(), DataError);
  v.n = 20;
  v.scene_id = "";
  CHECK_THROWS_AS(v.validate(), DataError);
}
