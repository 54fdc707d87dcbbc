#include "tonematch/stats.hpp"

#include <cmath>
#include <limits>

namespace tonematch {

namespace {

const char* const kCategoryNames[] = {"humans", "dark-noisy", "indoor",
                                      "structures", "landscapes"};

// log C(n, k)
double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

const char* category_name(SceneCategory c) {
  return kCategoryNames[static_cast<int>(c)];
}

SceneCategory category_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    if (name == kCategoryNames[i]) return static_cast<SceneCategory>(i);
  }
  throw DataError("unknown scene category '" + name + "'");
}

void VoteRecord::validate() const {
  if (scene_id.empty()) throw DataError("vote record with empty scene id");
  if (n <= 0) throw DataError("vote record '" + scene_id + "': no comparisons");
  if (wins_ours < 0 || ties < 0)
    throw DataError("vote record '" + scene_id + "': negative counts");
  if (wins_ours + ties > n)
    throw DataError("vote record '" + scene_id + "': wins + ties exceed total");
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kFavored: return "favored";
    case Verdict::kInconclusive: return "inconclusive";
    case Verdict::kDisfavored: return "disfavored";
  }
  return "?";
}

double preference_prob(int wins, int ties, int n) {
  if (n <= 0) throw DataError("preference_prob: n must be positive");
  if (wins < 0 || ties < 0 || wins + ties > n)
    throw DataError("preference_prob: invalid counts");
  return static_cast<double>(wins) / n + static_cast<double>(ties) / (2.0 * n);
}

double binomial_cdf(int k, int n, double p) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0))
    throw DataError("binomial_cdf: invalid arguments");
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  // Streaming log-sum-exp over terms log C(n,i) + i*lp + (n-i)*lq.
  double acc = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= k; ++i) {
    const double t = log_choose(n, i) + i * lp + (n - i) * lq;
    if (t > acc) {
      acc = t + std::log1p(std::exp(acc - t));
    } else {
      acc = acc + std::log1p(std::exp(t - acc));
    }
  }
  const double cdf = std::exp(acc);
  return cdf < 1.0 ? cdf : 1.0;
}

SignificanceThresholds significance_thresholds(int n, double gamma) {
  if (n <= 0) throw DataError("significance_thresholds: n must be positive");
  if (!(gamma > 0.5 && gamma < 1.0))
    throw DataError("significance_thresholds: gamma must lie in (0.5, 1)");
  // Nearest CDF point to gamma under the null Binomial(n, 1/2); ties resolved
  // toward the smaller k. The low side mirrors it exactly.
  int k_hi = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    const double d = std::fabs(binomial_cdf(k, n, 0.5) - gamma);
    if (d < best) {
      best = d;
      k_hi = k;
    }
  }
  SignificanceThresholds t;
  t.favored_at = k_hi;
  t.disfavored_at = n - k_hi - 1;
  return t;
}

Verdict significance(const VoteRecord& v, double gamma) {
  v.validate();
  const SignificanceThresholds t = significance_thresholds(v.n, gamma);
  if (v.wins_ours >= t.favored_at) return Verdict::kFavored;
  if (v.wins_ours <= t.disfavored_at) return Verdict::kDisfavored;
  return Verdict::kInconclusive;
}

}  // namespace tonematch
