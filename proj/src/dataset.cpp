#include "tonematch/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "tonematch/csv.hpp"
#include "tonematch/io.hpp"

namespace fs = std::filesystem;

namespace tonematch {

Raster resize_bilinear(const Raster& src, int out_h, int out_w) {
  if (src.width < 1 || src.height < 1)
    throw DataError("resize_bilinear: empty source");
  if (out_h < 1 || out_w < 1)
    throw DataError("resize_bilinear: output dims must be positive");
  Raster out(out_w, out_h);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const double top = src.at(y0, x0) * (1.0 - wx) + src.at(y0, x1) * wx;
      const double bot = src.at(y1, x0) * (1.0 - wx) + src.at(y1, x1) * wx;
      out.at(y, x) = static_cast<float>(top * (1.0 - wy) + bot * wy);
    }
  }
  return out;
}

Raster flip_horizontal(const Raster& src) {
  Raster out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      out.at(y, x) = src.at(y, src.width - 1 - x);
  return out;
}

Raster downsample2x(const Raster& src) {
  if (src.width % 2 || src.height % 2)
    throw DataError("downsample2x: dims must be even, got " +
                    std::to_string(src.width) + "x" + std::to_string(src.height));
  Raster out(src.width / 2, src.height / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.at(y, x) = 0.25f * (src.at(2 * y, 2 * x) + src.at(2 * y, 2 * x + 1) +
                              src.at(2 * y + 1, 2 * x) + src.at(2 * y + 1, 2 * x + 1));
  return out;
}

// ---------------------------------------------------------------------------

RankingRecord rank_scene(const HdrImage& hdr, const std::vector<TmoId>& ops,
                         const std::string& scene_id) {
  if (ops.empty()) throw DataError("rank_scene: no operators requested");
  const Raster lum = luminance(hdr);

  RankingRecord rec;
  rec.scene_id = scene_id;
  bool any_ok = false;
  for (TmoId op : ops) {
    RankingEntry e;
    e.op = op;
    try {
      const Raster ldr = apply_tmo(op, tmo_defaults(op), lum);
      const TmqiReport r = tmqi(lum, ldr);
      e.ok = true;
      e.structural = r.structural;
      e.naturalness = r.naturalness;
      e.score = r.score;
      any_ok = true;
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
    rec.entries.push_back(std::move(e));
  }
  if (!any_ok) {
    std::string msg = "rank_scene: all operators failed on '" + scene_id + "':";
    for (const auto& e : rec.entries)
      msg += std::string(" ") + tmo_name(e.op) + ": " + e.error + ";";
    throw DataError(msg);
  }

  bool have = false;
  double best_q = 0.0;
  TmoId best_op = TmoId::kGamma;
  for (const auto& e : rec.entries) {
    if (!e.ok) continue;
    if (!have || e.score > best_q ||
        (e.score == best_q && static_cast<int>(e.op) < static_cast<int>(best_op))) {
      have = true;
      best_q = e.score;
      best_op = e.op;
    }
  }
  rec.target = best_op;
  return rec;
}

// ---------------------------------------------------------------------------

void AugmentSpec::validate() const {
  if (resize_h < 1 || resize_w < 1 || crop_h < 1 || crop_w < 1)
    throw DataError("augment spec: dims must be positive");
  if (crop_h > resize_h || crop_w > resize_w)
    throw DataError("augment spec: crop " + std::to_string(crop_w) + "x" +
                    std::to_string(crop_h) + " does not fit in resize " +
                    std::to_string(resize_w) + "x" + std::to_string(resize_h));
  if (!(flip_prob >= 0.0f && flip_prob <= 1.0f))
    throw DataError("augment spec: flip_prob must lie in [0, 1]");
}

TrainingPair augment(const TrainingPair& pair, const AugmentSpec& spec,
                     Rng& draw) {
  spec.validate();
  if (!pair.x.same_shape(pair.y))
    throw DataError("augment: pair is not spatially aligned");

  Raster x = resize_bilinear(pair.x, spec.resize_h, spec.resize_w);
  Raster y = resize_bilinear(pair.y, spec.resize_h, spec.resize_w);

  // One shared draw sequence for both planes: row offset, col offset, flip.
  const int off_y = static_cast<int>(
      draw.uniform_u32(static_cast<std::uint32_t>(spec.resize_h - spec.crop_h + 1)));
  const int off_x = static_cast<int>(
      draw.uniform_u32(static_cast<std::uint32_t>(spec.resize_w - spec.crop_w + 1)));
  const bool flip = draw.uniform() < spec.flip_prob;

  TrainingPair out;
  out.scene_id = pair.scene_id;
  out.op = pair.op;
  out.x = Raster(spec.crop_w, spec.crop_h);
  out.y = Raster(spec.crop_w, spec.crop_h);
  for (int r = 0; r < spec.crop_h; ++r) {
    for (int c = 0; c < spec.crop_w; ++c) {
      out.x.at(r, c) = x.at(off_y + r, off_x + c);
      out.y.at(r, c) = y.at(off_y + r, off_x + c);
    }
  }
  if (flip) {
    out.x = flip_horizontal(out.x);
    out.y = flip_horizontal(out.y);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool has_hdr_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".hdr" || ext == ".pfm";
}

std::uint64_t fnv1a_file(const fs::path& p, std::uint64_t* size_out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  std::uint64_t h = 1469598103934665603ull;
  std::uint64_t n = 0;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    n += static_cast<std::uint64_t>(got);
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  if (size_out) *size_out = n;
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

Manifest dataset_manifest(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw DataError("not a directory: '" + dir + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_hdr_extension(entry.path()))
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  Manifest m;
  for (const auto& p : files) {
    const std::string stem = p.stem().string();
    if (!m.scenes.empty() && m.scenes.back().scene_id == stem) {
      m.diagnostics.push_back(p.string() + ": duplicate scene id '" + stem +
                              "', excluded");
      continue;
    }
    try {
      const HdrImage img = read_hdr(p);
      const Raster lum = luminance(img);
      float lo = lum.data[0], hi = lum.data[0];
      for (float v : lum.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      SceneInfo info;
      info.scene_id = stem;
      info.path = p.string();
      info.width = img.width;
      info.height = img.height;
      info.min_lum = lo;
      info.max_lum = hi;
      m.scenes.push_back(std::move(info));
    } catch (const std::exception& ex) {
      m.diagnostics.push_back(p.string() + ": " + ex.what());
    }
  }
  return m;
}

void write_manifest_csv(const Manifest& m, const std::string& path,
                        std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# seed=" << seed << "\n";
  out << "scene,path,width,height,min_lum,max_lum\n";
  for (const auto& s : m.scenes) {
    out << join_csv({s.scene_id, s.path, std::to_string(s.width),
                     std::to_string(s.height), format_double(s.min_lum),
                     format_double(s.max_lum)})
        << "\n";
  }
  for (const auto& d : m.diagnostics) out << "# excluded: " << d << "\n";
  if (!out) throw DataError("write failed for '" + path + "'");
}

void write_rank_csv(const std::vector<RankingRecord>& records,
                    const std::string& path, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# seed=" << seed << "\n";
  out << "scene,tmo,S,N,Q,is_target\n";
  for (const auto& rec : records) {
    for (const auto& e : rec.entries) {
      if (!e.ok) {
        out << "# failed: " << rec.scene_id << "," << tmo_name(e.op) << ","
            << e.error << "\n";
        continue;
      }
      const bool is_target = (e.op == rec.target);
      out << join_csv({rec.scene_id, tmo_name(e.op), format_double(e.structural),
                       format_double(e.naturalness), format_double(e.score),
                       is_target ? "1" : "0"})
          << "\n";
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

namespace {

struct CacheHeader {
  std::uint64_t hash = 0;
  std::uint64_t size = 0;
  int scale_div = 0;
  bool ok = false;
};

CacheHeader read_cache_header(const fs::path& rank_csv) {
  CacheHeader h;
  std::ifstream in(rank_csv);
  if (!in) return h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# source ", 0) == 0) {
      std::istringstream ls(line.substr(9));
      std::string hash_hex;
      if (ls >> hash_hex >> h.size >> h.scale_div) {
        h.hash = std::strtoull(hash_hex.c_str(), nullptr, 16);
        h.ok = true;
      }
      return h;
    }
    if (!line.empty() && line[0] != '#') return h;
  }
  return h;
}

bool cache_fresh(const fs::path& src, const fs::path& lum_pfm,
                 const fs::path& target_pfm, const fs::path& rank_csv,
                 int scale_div) {
  std::error_code ec;
  if (!fs::exists(lum_pfm, ec) || !fs::exists(target_pfm, ec) ||
      !fs::exists(rank_csv, ec))
    return false;
  if (fs::last_write_time(rank_csv, ec) < fs::last_write_time(src, ec) || ec)
    return false;
  const CacheHeader h = read_cache_header(rank_csv);
  if (!h.ok || h.scale_div != scale_div) return false;
  std::uint64_t size = 0;
  const std::uint64_t hash = fnv1a_file(src, &size);
  return hash == h.hash && size == h.size;
}

}  // namespace

BuildReport build_dataset(const std::string& src_dir,
                          const std::string& cache_dir,
                          const BuildOptions& opts) {
  if (opts.scale_div < 1) throw DataError("build_dataset: scale_div must be >= 1");
  const Manifest m = dataset_manifest(src_dir);
  fs::create_directories(cache_dir);

  BuildReport report;
  report.diagnostics = m.diagnostics;
  write_manifest_csv(m, (fs::path(cache_dir) / "manifest.csv").string(), opts.seed);

  struct SceneResult {
    bool built = false;
    bool fresh = false;
    std::string diagnostic;
    RankingRecord record;
  };
  std::vector<SceneResult> results(m.scenes.size());

  const int jobs = std::max(1, opts.jobs);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= m.scenes.size()) return;
      const SceneInfo& s = m.scenes[i];
      SceneResult& r = results[i];
      const fs::path src(s.path);
      const fs::path lum_pfm = fs::path(cache_dir) / (s.scene_id + ".lum.pfm");
      const fs::path target_pfm = fs::path(cache_dir) / (s.scene_id + ".target.pfm");
      const fs::path rank_csv = fs::path(cache_dir) / (s.scene_id + ".rank.csv");
      try {
        if (cache_fresh(src, lum_pfm, target_pfm, rank_csv, opts.scale_div)) {
          r.fresh = true;
          continue;
        }
        std::uint64_t src_size = 0;
        const std::uint64_t src_hash = fnv1a_file(src, &src_size);

        const HdrImage img = read_hdr(src);
        Raster lum = luminance(img);
        if (opts.scale_div > 1) {
          // Desk-scale shrink; the score path needs at least 32 px per side.
          const int h = std::max(32, static_cast<int>(std::lround(
                                         static_cast<double>(lum.height) / opts.scale_div)));
          const int w = std::max(32, static_cast<int>(std::lround(
                                         static_cast<double>(lum.width) / opts.scale_div)));
          lum = resize_bilinear(lum, h, w);
        }
        HdrImage lum_img(lum.width, lum.height, 1);
        lum_img.data = lum.data;

        RankingRecord rec = rank_scene(lum_img, all_tmo_ids(), s.scene_id);
        const Raster target = apply_tmo(rec.target, tmo_defaults(rec.target), lum);

        write_hdr(lum_img, lum_pfm, ImageFileFormat::kPfm);
        HdrImage target_img(target.width, target.height, 1);
        target_img.data = target.data;
        write_hdr(target_img, target_pfm, ImageFileFormat::kPfm);

        std::ofstream out(rank_csv);
        if (!out) throw DataError("cannot write '" + rank_csv.string() + "'");
        out << "# seed=" << opts.seed << "\n";
        out << "# source " << hex64(src_hash) << " " << src_size << " "
            << opts.scale_div << "\n";
        out << "scene,tmo,S,N,Q,is_target\n";
        for (const auto& e : rec.entries) {
          if (!e.ok) {
            out << "# failed: " << rec.scene_id << "," << tmo_name(e.op) << ","
                << e.error << "\n";
            continue;
          }
          out << join_csv({rec.scene_id, tmo_name(e.op),
                           format_double(e.structural),
                           format_double(e.naturalness), format_double(e.score),
                           e.op == rec.target ? "1" : "0"})
              << "\n";
        }
        if (!out) throw DataError("write failed for '" + rank_csv.string() + "'");
        r.built = true;
        r.record = std::move(rec);
      } catch (const std::exception& ex) {
        r.diagnostic = s.path + ": " + ex.what();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& r : results) {
    if (r.built) {
      ++report.built;
      report.records.push_back(std::move(r.record));
    } else if (r.fresh) {
      ++report.skipped_fresh;
    } else if (!r.diagnostic.empty()) {
      report.diagnostics.push_back(r.diagnostic);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

TrainingSet::TrainingSet(const std::string& cache_dir, NormalizationMode norm)
    : norm_(norm) {
  if (!fs::is_directory(cache_dir))
    throw DataError("not a directory: '" + cache_dir + "'");
  std::vector<fs::path> rank_files;
  for (const auto& entry : fs::directory_iterator(cache_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 9 &&
        name.substr(name.size() - 9) == ".rank.csv")
      rank_files.push_back(entry.path());
  }
  std::sort(rank_files.begin(), rank_files.end());

  for (const auto& rank_csv : rank_files) {
    std::string stem = rank_csv.filename().string();
    stem.resize(stem.size() - 9);

    const CsvTable t = read_csv_file(rank_csv.string());
    TmoId target = TmoId::kGamma;
    bool found = false;
    for (const auto& row : t.rows) {
      if (row.size() == 6 && row[5] == "1") {
        const auto id = tmo_from_name(row[1]);
        if (!id)
          throw DataError(rank_csv.string() + ": unknown operator '" + row[1] + "'");
        target = *id;
        found = true;
        break;
      }
    }
    if (!found)
      throw DataError(rank_csv.string() + ": no target row");

    const fs::path dir = rank_csv.parent_path();
    const HdrImage lum_img = read_hdr(dir / (stem + ".lum.pfm"));
    const HdrImage target_img = read_hdr(dir / (stem + ".target.pfm"));
    if (lum_img.channels != 1 || target_img.channels != 1)
      throw DataError("cache for '" + stem + "' is not single-channel");
    if (lum_img.width != target_img.width || lum_img.height != target_img.height)
      throw DataError("cache for '" + stem + "' has mismatched dimensions");

    LoadedScene s;
    s.scene_id = stem;
    s.op = target;
    s.lum = Raster(lum_img.width, lum_img.height);
    s.lum.data = lum_img.data;
    s.target = Raster(target_img.width, target_img.height);
    s.target.data = target_img.data;
    scenes_.push_back(std::move(s));
  }
  if (scenes_.empty())
    throw DataError("no cached scenes in '" + cache_dir + "'");
}

TrainingPair TrainingSet::pair(std::size_t i) const {
  const LoadedScene& s = scenes_.at(i);
  TrainingPair p;
  p.scene_id = s.scene_id;
  p.op = s.op;
  p.x = normalize(s.lum, norm_);
  p.y = s.target;
  return p;
}

// ---------------------------------------------------------------------------

BatchIterator::BatchIterator(const TrainingSet& set, const AugmentSpec& spec,
                             int batch_size)
    : set_(set), spec_(spec), batch_size_(batch_size) {
  spec_.validate();
  if (batch_size_ < 1) throw DataError("batch size must be >= 1");
  if (set_.size() == 0) throw DataError("empty training set");
  steps_per_epoch_ = std::max<int>(
      1, static_cast<int>(set_.size()) / batch_size_);
  reshuffle();
}

void BatchIterator::reshuffle() {
  order_.resize(set_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  // Epoch order depends only on (seed, epoch): Fisher-Yates with a derived rng.
  Rng rng(mix_seed(spec_.seed, static_cast<std::uint64_t>(epoch_), 0x0e70c4u));
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_u32(static_cast<std::uint32_t>(i));
    std::swap(order_[i - 1], order_[j]);
  }
}

void BatchIterator::seek(int epoch, int step) {
  if (epoch < 0 || step < 0 || step >= steps_per_epoch_)
    throw DataError("BatchIterator::seek: position out of range");
  epoch_ = epoch;
  step_ = step;
  reshuffle();
}

std::vector<TrainingPair> BatchIterator::next() {
  // Jitter draws depend only on (seed, epoch, step): a resumed iterator
  // replays the uninterrupted stream bit-for-bit.
  Rng rng(mix_seed(spec_.seed, static_cast<std::uint64_t>(epoch_),
                   static_cast<std::uint64_t>(step_)));
  std::vector<TrainingPair> batch;
  batch.reserve(static_cast<std::size_t>(batch_size_));
  for (int b = 0; b < batch_size_; ++b) {
    const std::size_t idx =
        order_[(static_cast<std::size_t>(step_) * batch_size_ + b) % order_.size()];
    batch.push_back(augment(set_.pair(idx), spec_, rng));
  }
  ++step_;
  if (step_ >= steps_per_epoch_) {
    step_ = 0;
    ++epoch_;
    reshuffle();
  }
  return batch;
}

}  // namespace tonematch
