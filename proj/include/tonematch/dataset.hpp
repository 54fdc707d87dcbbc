#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tonematch/image.hpp"
#include "tonematch/rng.hpp"
#include "tonematch/tmo.hpp"
#include "tonematch/tmqi.hpp"

namespace tonematch {

// Bilinear resampling with half-pixel-center alignment (source coordinate
// (i + 0.5) * in/out - 0.5, clamped). Shared by augmentation and desk-scale
// downsizing so every resize in the pipeline agrees on one convention.
Raster resize_bilinear(const Raster& src, int out_h, int out_w);

Raster flip_horizontal(const Raster& src);

// Exact 2x reduction by 2x2 mean pooling; both dims must be even.
Raster downsample2x(const Raster& src);

// ---------------------------------------------------------------------------
// Ranking: score every operator's rendition with tmqi, keep the best.

struct RankingEntry {
  TmoId op = TmoId::kGamma;
  bool ok = false;
  std::string error;       // failure cause when !ok
  double structural = 0.0; // S, N, Q valid only when ok
  double naturalness = 0.0;
  double score = 0.0;
};

struct RankingRecord {
  std::string scene_id;
  std::vector<RankingEntry> entries;  // in the order the ops were requested
  TmoId target = TmoId::kGamma;       // argmax Q; exact ties break toward the
                                      // smaller TmoId enum value
};

// Applies each operator (default parameters, luminance domain) and scores it.
// Per-operator failures are recorded in the entry; the scene is ranked over
// the survivors. Throws DataError when every operator fails.
RankingRecord rank_scene(const HdrImage& hdr, const std::vector<TmoId>& ops,
                         const std::string& scene_id = "");

// ---------------------------------------------------------------------------
// Training pairs and augmentation.

struct TrainingPair {
  Raster x;  // normalized HDR luminance
  Raster y;  // target LDR luminance, spatially aligned with x
  std::string scene_id;
  TmoId op = TmoId::kGamma;
};

struct AugmentSpec {
  int resize_h = 700;
  int resize_w = 1100;
  int crop_h = 512;
  int crop_w = 512;
  float flip_prob = 0.5f;
  std::uint64_t seed = 0;

  void validate() const;  // crop fits in resize; flip_prob in [0,1]
};

// Resizes x and y to (resize_h, resize_w), crops both at one shared random
// offset, then flips both together with probability flip_prob. Draw order is
// fixed (offset row, offset col, flip uniform) so a given rng state always
// produces the same jitter.
TrainingPair augment(const TrainingPair& pair, const AugmentSpec& spec,
                     Rng& draw);

// ---------------------------------------------------------------------------
// Manifests.

struct SceneInfo {
  std::string scene_id;  // filename stem
  std::string path;
  int width = 0;
  int height = 0;
  float min_lum = 0.0f;
  float max_lum = 0.0f;
};

struct Manifest {
  std::vector<SceneInfo> scenes;          // lexicographic by filename
  std::vector<std::string> diagnostics;   // unreadable files, excluded
};

// Scans dir for .hdr/.pfm files (case-insensitive extension match).
Manifest dataset_manifest(const std::string& dir);

void write_manifest_csv(const Manifest& m, const std::string& path,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset cache: per scene, <scene>.lum.pfm (linear luminance, possibly
// desk-scale downsized), <scene>.target.pfm (best rendition), and
// <scene>.rank.csv (all scores + freshness header). A scene is skipped when
// its cache is fresh: all three files present, rank.csv newer than the
// source, and the recorded source hash/size/scale-div still match.

struct BuildOptions {
  int scale_div = 1;   // downsize sources by this factor before ranking
  int jobs = 1;        // worker threads across scenes
  std::uint64_t seed = 0;  // recorded in report headers
};

struct BuildReport {
  int built = 0;
  int skipped_fresh = 0;
  std::vector<std::string> diagnostics;
  std::vector<RankingRecord> records;  // freshly built scenes only
};

BuildReport build_dataset(const std::string& src_dir,
                          const std::string& cache_dir,
                          const BuildOptions& opts);

void write_rank_csv(const std::vector<RankingRecord>& records,
                    const std::string& path, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batch iteration over a built cache.

struct LoadedScene {
  std::string scene_id;
  TmoId op = TmoId::kGamma;
  Raster lum;     // linear luminance as cached
  Raster target;  // best rendition
};

class TrainingSet {
 public:
  TrainingSet(const std::string& cache_dir, NormalizationMode norm);

  std::size_t size() const { return scenes_.size(); }
  const LoadedScene& scene(std::size_t i) const { return scenes_[i]; }

  // Full-resolution pair: x = normalize(lum, norm), y = target.
  TrainingPair pair(std::size_t i) const;

 private:
  std::vector<LoadedScene> scenes_;
  NormalizationMode norm_;
};

// Single-consumer batch stream. Epoch order and per-step jitter draws are
// derived from (seed, epoch, step) alone, so seek(epoch, step) replays the
// exact stream an uninterrupted run would have produced.
class BatchIterator {
 public:
  BatchIterator(const TrainingSet& set, const AugmentSpec& spec,
                int batch_size);

  std::vector<TrainingPair> next();
  void seek(int epoch, int step);

  int epoch() const { return epoch_; }
  int step() const { return step_; }  // next step to be produced
  int steps_per_epoch() const { return steps_per_epoch_; }

 private:
  void reshuffle();

  const TrainingSet& set_;
  AugmentSpec spec_;
  int batch_size_;
  int steps_per_epoch_;
  int epoch_ = 0;
  int step_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace tonematch
