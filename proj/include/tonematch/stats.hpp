#pragma once

#include <string>
#include <vector>

#include "tonematch/common.hpp"

namespace tonematch {

enum class SceneCategory { kHumans, kDarkNoisy, kIndoor, kStructures, kLandscapes };

const char* category_name(SceneCategory c);
SceneCategory category_from_name(const std::string& name);

struct VoteRecord {
  std::string scene_id;
  SceneCategory category = SceneCategory::kStructures;
  int wins_ours = 0;  // votes for our rendition
  int ties = 0;
  int n = 0;          // total comparisons

  void validate() const;
};

enum class Verdict { kFavored, kInconclusive, kDisfavored };

const char* verdict_name(Verdict v);

// Preference probability with ties split evenly: w/N + t/(2N).
double preference_prob(int wins, int ties, int n);

// P[X <= k] for X ~ Binomial(n, p), terms accumulated in log space.
double binomial_cdf(int k, int n, double p);

// Two-sided significance thresholds at level gamma (default 0.95), read off
// the binomial(n, 1/2) CDF at the nearest point to the level: Favored iff
// wins >= k_hi with k_hi = argmin_k |CDF(k) - gamma|, Disfavored iff
// wins <= k_lo with k_lo = argmin_k |CDF(k) - (1 - gamma)| (ties toward the
// smaller k). Symmetric by construction: k_lo = n - k_hi - 1.
struct SignificanceThresholds {
  int favored_at = 0;     // wins >= this  -> Favored
  int disfavored_at = 0;  // wins <= this  -> Disfavored
};

SignificanceThresholds significance_thresholds(int n, double gamma = 0.95);

Verdict significance(const VoteRecord& v, double gamma = 0.95);

}  // namespace tonematch
