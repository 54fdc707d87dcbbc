// tonemap: classical tone mapping, TMQI scoring/ranking, dataset building,
// GAN training/inference, and pairwise-vote analysis in one binary.
//
// Exit codes: 0 success, 1 usage, 2 malformed data, 3 numeric failure.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tonematch/csv.hpp"
#include "tonematch/dataset.hpp"
#include "tonematch/gan.hpp"
#include "tonematch/image.hpp"
#include "tonematch/io.hpp"
#include "tonematch/stats.hpp"
#include "tonematch/tmo.hpp"
#include "tonematch/tmqi.hpp"

namespace fs = std::filesystem;
using namespace tonematch;

namespace {

// Flag-level misuse (unknown operator names and the like): exit code 1, like
// any other command-line error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_jobs() {
  const char* env = std::getenv("TONEMATCH_JOBS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(v);
}

std::string valid_op_names() {
  std::string s;
  for (TmoId id : all_tmo_ids()) {
    if (!s.empty()) s += ", ";
    s += tmo_name(id);
  }
  return s;
}

TmoId parse_op_name(const std::string& name) {
  const std::optional<TmoId> id = tmo_from_name(name);
  if (!id)
    throw UsageError("unknown operator '" + name + "' (valid: " +
                     valid_op_names() + ")");
  return *id;
}

std::vector<TmoId> parse_ops_list(const std::string& spec) {
  if (spec == "all") return all_tmo_ids();
  std::vector<TmoId> ops;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    const std::string tok =
        spec.substr(pos, comma == std::string::npos ? std::string::npos
                                                    : comma - pos);
    if (tok.empty()) throw UsageError("--ops: empty operator name in list");
    ops.push_back(parse_op_name(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (ops.empty()) throw UsageError("--ops: no operators given");
  return ops;
}

// --param k=v entries, validated against the operator's frozen defaults
// before any file is touched.
TmoParams parse_params(TmoId id, const std::vector<std::string>& kvs) {
  TmoParams params = tmo_defaults(id);
  for (const std::string& kv : kvs) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("--param expects k=v, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    if (params.values.find(key) == params.values.end()) {
      std::string valid;
      for (const auto& [k, v] : params.values) {
        if (!valid.empty()) valid += ", ";
        valid += k;
      }
      throw UsageError("operator '" + std::string(tmo_name(id)) +
                       "' has no parameter '" + key + "'" +
                       (valid.empty() ? " (it takes none)"
                                      : " (valid: " + valid + ")"));
    }
    params.set(key, parse_double_field(kv.substr(eq + 1), key));
  }
  return params;
}

std::ofstream open_report(const fs::path& path, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open report file " + path.string());
  out << "# seed=" << seed << "\n";
  return out;
}

// --- rank -------------------------------------------------------------------

void write_hist_csv(const std::vector<RankingRecord>& records,
                    const std::vector<TmoId>& ops, const fs::path& path,
                    std::uint64_t seed) {
  constexpr int kBins = 20;
  const auto bin_of = [](double q) {
    return std::clamp(static_cast<int>(q * kBins), 0, kBins - 1);
  };
  std::ofstream out = open_report(path, seed);
  out << "# scene counts over " << kBins
      << " equal TMQI bins on [0,1]; series 'target' bins each scene's best "
         "rendition\n";
  out << "series,bin_lo,bin_hi,count\n";
  const auto emit = [&](const std::string& series, const int counts[kBins]) {
    for (int b = 0; b < kBins; ++b)
      out << series << ',' << format_double(static_cast<double>(b) / kBins)
          << ',' << format_double(static_cast<double>(b + 1) / kBins) << ','
          << counts[b] << "\n";
  };
  for (TmoId op : ops) {
    int counts[kBins] = {};
    for (const RankingRecord& rec : records)
      for (const RankingEntry& e : rec.entries)
        if (e.op == op && e.ok) ++counts[bin_of(e.score)];
    emit(tmo_name(op), counts);
  }
  int best[kBins] = {};
  for (const RankingRecord& rec : records)
    for (const RankingEntry& e : rec.entries)
      if (e.op == rec.target && e.ok) ++best[bin_of(e.score)];
  emit("target", best);
}

void cmd_rank(const std::string& in_dir, const std::string& ops_spec,
              const std::string& report, int jobs, std::uint64_t seed) {
  const std::vector<TmoId> ops = parse_ops_list(ops_spec);
  const Manifest manifest = dataset_manifest(in_dir);
  for (const std::string& d : manifest.diagnostics)
    std::cerr << "warning: " << d << "\n";
  if (manifest.scenes.empty())
    throw DataError("no HDR scenes found in " + in_dir);

  std::vector<RankingRecord> records(manifest.scenes.size());
  std::vector<std::string> failures(manifest.scenes.size());
  std::atomic<std::size_t> cursor{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= manifest.scenes.size()) return;
      try {
        const HdrImage hdr = read_hdr(manifest.scenes[i].path);
        records[i] = rank_scene(hdr, ops, manifest.scenes[i].scene_id);
      } catch (const std::exception& e) {
        failures[i] = manifest.scenes[i].path + ": " + e.what();
      }
    }
  };
  const int n_threads = std::max(
      1, std::min<int>(jobs, static_cast<int>(manifest.scenes.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const std::string& f : failures)
    if (!f.empty()) throw DataError(f);

  write_rank_csv(records, report, seed);
  fs::path hist(report);
  hist.replace_extension(".hist.csv");
  write_hist_csv(records, ops, hist, seed);
  std::cout << "ranked " << records.size() << " scene(s) with " << ops.size()
            << " operator(s); report: " << report << ", histogram: "
            << hist.string() << "\n";
}

// --- bt ----------------------------------------------------------------------

bool looks_like_header(const std::vector<std::string>& row) {
  return !row.empty() && row[0] == "scene";
}

void cmd_bt(const std::string& votes_path, const std::string& report,
            std::uint64_t seed) {
  const CsvTable table = read_csv_file(votes_path);
  std::ofstream out = open_report(report, seed);
  out << "scene,category,wins,ties,n,pref,verdict,favored_at,disfavored_at\n";
  bool any = false;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (r == 0 && looks_like_header(row)) continue;
    if (row.size() != 5)
      throw DataError(votes_path + ": vote rows need 5 fields "
                      "(scene,category,wins,ties,n), got " +
                      std::to_string(row.size()));
    VoteRecord v;
    v.scene_id = row[0];
    v.category = category_from_name(row[1]);
    v.wins_ours = static_cast<int>(parse_long_field(row[2], "wins"));
    v.ties = static_cast<int>(parse_long_field(row[3], "ties"));
    v.n = static_cast<int>(parse_long_field(row[4], "n"));
    v.validate();
    const SignificanceThresholds th = significance_thresholds(v.n);
    out << v.scene_id << ',' << category_name(v.category) << ',' << v.wins_ours
        << ',' << v.ties << ',' << v.n << ','
        << format_double(preference_prob(v.wins_ours, v.ties, v.n)) << ','
        << verdict_name(significance(v)) << ',' << th.favored_at << ','
        << th.disfavored_at << "\n";
    any = true;
  }
  if (!any) throw DataError(votes_path + ": no vote rows");
  std::cout << "wrote " << report << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDR tone mapping toolkit: classical operators, TMQI scoring "
               "and ranking, dataset building, GAN training and inference, "
               "pairwise-vote analysis."};
  app.require_subcommand(1);

  // apply
  auto* apply = app.add_subcommand("apply", "Tone-map an HDR image with a classical operator");
  std::string apply_op, apply_in, apply_out;
  double apply_sat = 1.0;
  std::vector<std::string> apply_params;
  apply->add_option("--op", apply_op, "Operator name (see 'describe --ops')")->required();
  apply->add_option("--in", apply_in, "Input HDR image (.hdr or .pfm)")->required();
  apply->add_option("--out", apply_out, "Output PNG path")->required();
  apply->add_option("--sat", apply_sat, "Color saturation in [0,1] (default 1)");
  apply->add_option("--param", apply_params, "Operator parameter override k=v (repeatable)");
  apply->callback([&] {
    const TmoId id = parse_op_name(apply_op);
    const TmoParams params = parse_params(id, apply_params);
    const HdrImage hdr = read_hdr(apply_in);
    const LdrImage ldr = apply_tmo_color(id, params, hdr, static_cast<float>(apply_sat));
    write_png8(ldr, apply_out);
  });

  // tmqi
  auto* tq = app.add_subcommand("tmqi", "Score a tone-mapped rendition against its HDR source");
  std::string tq_hdr, tq_ldr, tq_report;
  std::uint64_t tq_seed = 0;
  tq->add_option("--hdr", tq_hdr, "HDR source (.hdr or .pfm)")->required();
  tq->add_option("--ldr", tq_ldr, "Tone-mapped rendition (.png or .pfm)")->required();
  tq->add_option("--report", tq_report, "Output CSV path")->required();
  tq->add_option("--seed", tq_seed, "Seed recorded in the report header");
  tq->callback([&] {
    const HdrImage hdr = read_hdr(tq_hdr);
    const LdrImage ldr = read_ldr(tq_ldr);
    const TmqiReport rep = tmqi(luminance(hdr), luminance(ldr));
    std::ofstream out = open_report(tq_report, tq_seed);
    out << "scene,op,S,N,Q,s1,s2,s3,s4,s5\n";
    out << fs::path(tq_hdr).stem().string() << ','
        << fs::path(tq_ldr).stem().string() << ','
        << format_double(rep.structural) << ','
        << format_double(rep.naturalness) << ',' << format_double(rep.score);
    for (double s : rep.per_scale) out << ',' << format_double(s);
    out << "\n";
    std::cout << "TMQI Q=" << format_double(rep.score)
              << " S=" << format_double(rep.structural)
              << " N=" << format_double(rep.naturalness) << "\n";
  });

  // rank
  auto* rank = app.add_subcommand("rank", "Rank operators per scene by TMQI over a directory");
  std::string rank_in, rank_ops = "all", rank_report;
  int rank_jobs = default_jobs();
  std::uint64_t rank_seed = 0;
  rank->add_option("--in", rank_in, "Directory of HDR scenes")->required();
  rank->add_option("--ops", rank_ops, "Comma-separated operator list or 'all'");
  rank->add_option("--report", rank_report, "Output CSV path (histogram lands next to it)")->required();
  rank->add_option("--jobs", rank_jobs, "Worker threads (default $TONEMATCH_JOBS or 1)");
  rank->add_option("--seed", rank_seed, "Seed recorded in report headers");
  rank->callback([&] { cmd_rank(rank_in, rank_ops, rank_report, rank_jobs, rank_seed); });

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Rank scenes and cache training targets");
  std::string build_in, build_cache;
  int build_div = 1, build_jobs = default_jobs();
  std::uint64_t build_seed = 0;
  build->add_option("--in", build_in, "Directory of HDR scenes")->required();
  build->add_option("--cache", build_cache, "Cache directory to create/update")->required();
  build->add_option("--scale-div", build_div, "Downsize sources by this factor before ranking");
  build->add_option("--jobs", build_jobs, "Worker threads (default $TONEMATCH_JOBS or 1)");
  build->add_option("--seed", build_seed, "Seed recorded in report headers");
  build->callback([&] {
    BuildOptions opts;
    opts.scale_div = build_div;
    opts.jobs = build_jobs;
    opts.seed = build_seed;
    const BuildReport rep = build_dataset(build_in, build_cache, opts);
    for (const std::string& d : rep.diagnostics) std::cerr << "warning: " << d << "\n";
    std::cout << "built " << rep.built << " scene(s), " << rep.skipped_fresh
              << " fresh\n";
    if (rep.built + rep.skipped_fresh == 0)
      throw DataError("no usable HDR scenes in " + build_in);
  });

  // train
  auto* train = app.add_subcommand("train", "Train the tone-mapping GAN on a built cache");
  std::string train_cfg, train_data, train_ckpt;
  std::uint64_t train_seed = 0;
  auto* train_seed_opt =
      train->add_option("--seed", train_seed, "Override the config's seed");
  train->add_option("--config", train_cfg, "Flat key=value config file")->required();
  train->add_option("--data", train_data, "Dataset cache directory")->required();
  train->add_option("--ckpt-dir", train_ckpt, "Checkpoint/log directory")->required();
  train->callback([&] {
    gan::TrainConfig cfg = gan::parse_train_config(train_cfg);
    if (train_seed_opt->count() > 0) cfg.seed = train_seed;
    const fs::path last = gan::train(cfg, train_data, train_ckpt);
    std::cout << "training complete; last checkpoint: " << last.string() << "\n";
  });

  // infer
  auto* infer = app.add_subcommand("infer", "Tone-map an HDR image with a trained checkpoint");
  std::string infer_ckpt, infer_in, infer_out;
  double infer_sat = 1.0;
  bool infer_time = false;
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint file (.dtmo)")->required();
  infer->add_option("--in", infer_in, "Input HDR image (.hdr or .pfm)")->required();
  infer->add_option("--out", infer_out, "Output PNG path")->required();
  infer->add_option("--sat", infer_sat, "Color saturation in [0,1] (default 1)");
  infer->add_flag("--time", infer_time, "Report mean wall time over 10 runs");
  infer->callback([&] {
    const HdrImage hdr = read_hdr(infer_in);
    double seconds = 0.0;
    const LdrImage ldr =
        gan::infer(infer_ckpt, hdr, static_cast<float>(infer_sat), &seconds);
    write_png8(ldr, infer_out);
    if (infer_time) {
      double total = seconds;
      for (int i = 1; i < 10; ++i) {
        double s = 0.0;
        (void)gan::infer(infer_ckpt, hdr, static_cast<float>(infer_sat), &s);
        total += s;
      }
      std::cout << "mean wall time over 10 runs: " << format_double(total / 10.0)
                << " s\n";
    }
  });

  // bt
  auto* bt = app.add_subcommand("bt", "Analyze pairwise preference votes");
  std::string bt_votes, bt_report;
  std::uint64_t bt_seed = 0;
  bt->add_option("--votes", bt_votes, "Votes CSV (scene,category,wins,ties,n)")->required();
  bt->add_option("--report", bt_report, "Output CSV path")->required();
  bt->add_option("--seed", bt_seed, "Seed recorded in the report header");
  bt->callback([&] { cmd_bt(bt_votes, bt_report, bt_seed); });

  // describe
  auto* describe = app.add_subcommand("describe", "Print frozen defaults");
  bool describe_ops = false;
  describe->add_flag("--ops", describe_ops, "Operator default-parameter table");
  describe->callback([&] {
    if (!describe_ops) throw UsageError("describe: nothing selected (try --ops)");
    std::cout << describe_tmos();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
