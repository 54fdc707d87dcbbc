#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ckpt_meta.hpp"
#include "tonematch/common.hpp"
#include "tonematch/csv.hpp"
#include "tonematch/gan.hpp"
#include "tonematch/rng.hpp"

namespace fs = std::filesystem;

namespace tonematch::gan {

namespace {

using detail::CkptMeta;

// --- train step --------------------------------------------------------------

StepReport run_step(const std::function<Tensor(const Tensor&)>& gen_fwd,
                    Discriminator& d, PerceptualNet& p, const Tensor& x,
                    const Tensor& y, const LossWeights& w, nn::Adam& opt_g,
                    nn::Adam& opt_d, const std::vector<NamedParam>* frozen) {
  StepReport rep;
  Tensor fake = gen_fwd(x);

  // D step: the rendition enters as data, so no gradient reaches G here.
  {
    Tensor fake_data = fake.detach(false);
    std::vector<DiscriminatorOutput> outs_real = d.forward(x, y);
    std::vector<DiscriminatorOutput> outs_fake = d.forward(x, fake_data);
    Tensor d_loss;
    for (std::size_t s = 0; s < outs_real.size(); ++s) {
      Tensor term = nn::add(lsgan_loss(outs_real[s].logits, true),
                            lsgan_loss(outs_fake[s].logits, false));
      d_loss = d_loss.defined() ? nn::add(d_loss, term) : term;
    }
    rep.d_loss = d_loss.scalar();
    opt_d.zero_grad();
    d_loss.backward();
    opt_d.step();
  }

  // G step against the just-updated discriminator.
  std::vector<DiscriminatorOutput> outs_fake = d.forward(x, fake);
  std::vector<DiscriminatorOutput> outs_real = d.forward(x, y);
  Tensor adv;
  for (const auto& o : outs_fake) {
    Tensor term = lsgan_loss(o.logits, true);
    adv = adv.defined() ? nn::add(adv, term) : term;
  }
  Tensor fm = fm_loss(outs_real, outs_fake);
  Tensor perc = perceptual_loss(y, fake, p);
  Tensor total =
      nn::add(adv, nn::add(nn::scale(fm, w.fm), nn::scale(perc, w.perceptual)));
  rep.g_adv = adv.scalar();
  rep.g_fm = fm.scalar();
  rep.g_perc = perc.scalar();
  rep.g_total = total.scalar();
  opt_g.zero_grad();
  total.backward();
  if (frozen) {
    for (const auto& fp : *frozen) {
      Tensor t = fp.tensor;
      if (t.has_grad()) t.zero_grad();
    }
  }
  opt_g.step();
  return rep;
}

// Phase-local schedule: when no decay window fits (warm >= total) the rate
// stays constant; warm is clamped to >= 1 to satisfy the schedule contract.
double phase_lr(double base, int epoch, int warm, int total_epochs) {
  if (warm >= total_epochs) return base;
  return nn::lr_schedule(base, epoch, std::max(1, warm), total_epochs);
}

// --- config ------------------------------------------------------------------

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64_field(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError(what + ": empty value");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size() || s[0] == '-')
    throw DataError(what + ": cannot parse '" + s + "' as an unsigned integer");
  return static_cast<std::uint64_t>(v);
}

int parse_int(const std::string& s, const std::string& what) {
  return static_cast<int>(parse_long_field(s, what));
}

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& val) {
  if (key == "scale") {
    if (val == "single") cfg.gen.scale = GanScale::kSingle;
    else if (val == "multi") cfg.gen.scale = GanScale::kMulti;
    else throw DataError("scale: expected 'single' or 'multi', got '" + val + "'");
  } else if (key == "base_width") {
    cfg.gen.base_width = parse_int(val, key);
  } else if (key == "n_resblocks") {
    cfg.gen.n_resblocks = parse_int(val, key);
  } else if (key == "n_down") {
    cfg.gen.n_down = parse_int(val, key);
  } else if (key == "norm") {
    if (val == "instance") cfg.gen.norm = nn::NormKind::kInstance;
    else if (val == "batch") cfg.gen.norm = nn::NormKind::kBatch;
    else throw DataError("norm: expected 'instance' or 'batch', got '" + val + "'");
  } else if (key == "d_base_width") {
    cfg.disc.base_width = parse_int(val, key);
  } else if (key == "d_layers") {
    cfg.disc.n_layers = parse_int(val, key);
  } else if (key == "perc_base_width") {
    cfg.perc_base_width = parse_int(val, key);
  } else if (key == "fm_weight") {
    cfg.weights.fm = parse_double_field(val, key);
  } else if (key == "perc_weight") {
    cfg.weights.perceptual = parse_double_field(val, key);
  } else if (key == "lr") {
    cfg.lr = parse_double_field(val, key);
  } else if (key == "beta1") {
    cfg.beta1 = parse_double_field(val, key);
  } else if (key == "beta2") {
    cfg.beta2 = parse_double_field(val, key);
  } else if (key == "epochs") {
    cfg.epochs = parse_int(val, key);
  } else if (key == "warm_epochs") {
    cfg.warm_epochs = parse_int(val, key);
  } else if (key == "batch") {
    cfg.batch = parse_int(val, key);
  } else if (key == "seed") {
    cfg.seed = parse_u64_field(val, key);
  } else if (key == "ckpt_every") {
    cfg.ckpt_every = parse_int(val, key);
  } else if (key == "freeze_coarse_epochs") {
    cfg.freeze_coarse_epochs = parse_int(val, key);
  } else if (key == "phase1_epochs") {
    cfg.phase1_epochs = parse_int(val, key);
  } else if (key == "input_norm") {
    if (val == "linear") cfg.input_norm.variant = NormalizationVariant::kLinear;
    else if (val == "log") cfg.input_norm.variant = NormalizationVariant::kLog;
    else throw DataError("input_norm: expected 'linear' or 'log', got '" + val + "'");
  } else if (key == "input_norm_eps") {
    cfg.input_norm.epsilon = static_cast<float>(parse_double_field(val, key));
  } else if (key == "resize_h") {
    cfg.resize_h = parse_int(val, key);
  } else if (key == "resize_w") {
    cfg.resize_w = parse_int(val, key);
  } else if (key == "crop_h") {
    cfg.crop_h = parse_int(val, key);
  } else if (key == "crop_w") {
    cfg.crop_w = parse_int(val, key);
  } else if (key == "scale_div") {
    cfg.scale_div = parse_int(val, key);
  } else if (key == "flip_prob") {
    cfg.flip_prob = static_cast<float>(parse_double_field(val, key));
  } else {
    throw DataError("unknown config key '" + key + "'");
  }
}

// --- checkpoint assembly -----------------------------------------------------

std::vector<NamedTensorData> extract_prefixed(
    const std::vector<NamedTensorData>& in, const std::string& prefix) {
  std::vector<NamedTensorData> out;
  for (const auto& t : in) {
    if (t.name.rfind(prefix, 0) == 0) {
      NamedTensorData rec = t;
      rec.name = t.name.substr(prefix.size());
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::string write_ckpt(const fs::path& dir, const Generator& g,
                       const Discriminator& d, const nn::Adam& opt_g,
                       const nn::Adam& opt_d, const CkptMeta& meta) {
  std::vector<NamedTensorData> tensors = g.state();
  for (auto& t : d.state()) {
    t.name = "disc." + t.name;
    tensors.push_back(std::move(t));
  }
  for (auto& t : opt_g.state("opt_g.")) tensors.push_back(std::move(t));
  for (auto& t : opt_d.state("opt_d.")) tensors.push_back(std::move(t));
  detail::append_meta(tensors, meta);
  char name[48];
  std::snprintf(name, sizeof name, "ckpt-p%d-e%04d.dtmo", meta.phase, meta.epoch);
  const fs::path ckpt = dir / name;
  nn::write_checkpoint(ckpt, tensors);
  nn::write_checkpoint(dir / "latest.dtmo", tensors);
  return ckpt.string();
}

void check_meta(bool ok, const std::string& field, const std::string& detail_msg) {
  if (!ok)
    throw DataError("resume checkpoint does not match the config (" + field +
                    ": " + detail_msg + ")");
}

void validate_meta(const CkptMeta& m, const TrainConfig& cfg) {
  check_meta(m.scale == cfg.gen.scale, "scale",
             m.scale == GanScale::kMulti ? "checkpoint is multi" : "checkpoint is single");
  check_meta(m.base_width == cfg.gen.base_width, "base_width",
             std::to_string(m.base_width) + " vs " + std::to_string(cfg.gen.base_width));
  check_meta(m.n_resblocks == cfg.gen.n_resblocks, "n_resblocks",
             std::to_string(m.n_resblocks) + " vs " + std::to_string(cfg.gen.n_resblocks));
  check_meta(m.n_down == cfg.gen.n_down, "n_down",
             std::to_string(m.n_down) + " vs " + std::to_string(cfg.gen.n_down));
  check_meta(m.norm == cfg.gen.norm, "norm", "normalization kind differs");
  check_meta(m.d_base_width == cfg.disc.base_width, "d_base_width",
             std::to_string(m.d_base_width) + " vs " + std::to_string(cfg.disc.base_width));
  check_meta(m.d_layers == cfg.disc.n_layers, "d_layers",
             std::to_string(m.d_layers) + " vs " + std::to_string(cfg.disc.n_layers));
  check_meta(m.perc_base_width == cfg.perc_base_width, "perc_base_width",
             std::to_string(m.perc_base_width) + " vs " + std::to_string(cfg.perc_base_width));
  check_meta(m.input_norm == cfg.input_norm.variant, "input_norm",
             "normalization variant differs");
  check_meta(m.input_norm_eps == cfg.input_norm.epsilon, "input_norm_eps",
             "epsilon differs");
  check_meta(m.seed == cfg.seed, "seed",
             std::to_string(m.seed) + " vs " + std::to_string(cfg.seed));
}

}  // namespace

StepReport train_step(Generator& g, Discriminator& d, PerceptualNet& p,
                      const Tensor& x, const Tensor& y, const LossWeights& w,
                      nn::Adam& opt_g, nn::Adam& opt_d,
                      const std::vector<NamedParam>* frozen) {
  return run_step([&g](const Tensor& in) { return g.forward(in); }, d, p, x, y,
                  w, opt_g, opt_d, frozen);
}

void TrainConfig::finalize() {
  const bool multi = gen.scale == GanScale::kMulti;
  disc.scale = gen.scale;
  if (batch < 0) batch = multi ? 1 : 4;
  if (phase1_epochs < 0) phase1_epochs = epochs;
  if (resize_h < 0) resize_h = multi ? 1400 : 700;
  if (resize_w < 0) resize_w = multi ? 2200 : 1100;
  if (crop_h < 0) crop_h = multi ? 1024 : 512;
  if (crop_w < 0) crop_w = multi ? 1024 : 512;
  if (scale_div < 1) throw DataError("scale_div must be >= 1");
  if (gen.n_down < 1 || gen.n_down > 16) throw DataError("n_down out of range");
  const int m = 1 << gen.n_down;
  if (scale_div > 1) {
    // Desk-scale geometry: divide, then snap crops down to the alignment the
    // generator's downsampling chain needs.
    crop_h = std::max(m, crop_h / scale_div / m * m);
    crop_w = std::max(m, crop_w / scale_div / m * m);
    resize_h = std::max(crop_h, resize_h / scale_div);
    resize_w = std::max(crop_w, resize_w / scale_div);
  }
  if (crop_h % m != 0 || crop_w % m != 0)
    throw DataError("crop dims must be multiples of " + std::to_string(m) +
                    " (2^n_down)");
  if (resize_h < crop_h || resize_w < crop_w)
    throw DataError("resize dims must be >= crop dims");
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (warm_epochs < 0 || warm_epochs > epochs)
    throw DataError("warm_epochs must lie in [0, epochs]");
  if (batch < 1) throw DataError("batch must be >= 1");
  if (ckpt_every < 1) throw DataError("ckpt_every must be >= 1");
  if (lr <= 0) throw DataError("lr must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw DataError("adam betas must lie in [0, 1)");
  if (weights.fm < 0 || weights.perceptual < 0)
    throw DataError("loss weights must be >= 0");
  if (flip_prob < 0.0f || flip_prob > 1.0f)
    throw DataError("flip_prob must lie in [0, 1]");
  if (freeze_coarse_epochs < 0)
    throw DataError("freeze_coarse_epochs must be >= 0");
  if (perc_base_width < 1) throw DataError("perc_base_width must be >= 1");
  if (input_norm.epsilon <= 0.0f) throw DataError("input_norm_eps must be > 0");
}

TrainConfig parse_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  TrainConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected key=value");
    apply_key(cfg, trimmed(line.substr(0, eq)), trimmed(line.substr(eq + 1)));
  }
  return cfg;
}

std::filesystem::path train(const TrainConfig& cfg_in, const std::string& data_dir,
                            const std::string& ckpt_dir) {
  TrainConfig cfg = cfg_in;
  cfg.finalize();
  fs::create_directories(ckpt_dir);

  TrainingSet set(data_dir, cfg.input_norm);
  if (set.size() == 0)
    throw DataError("no cached training scenes in " + data_dir);
  AugmentSpec spec;
  spec.resize_h = cfg.resize_h;
  spec.resize_w = cfg.resize_w;
  spec.crop_h = cfg.crop_h;
  spec.crop_w = cfg.crop_w;
  spec.flip_prob = cfg.flip_prob;
  spec.seed = cfg.seed;
  spec.validate();
  BatchIterator it(set, spec, cfg.batch);

  const bool multi = cfg.gen.scale == GanScale::kMulti;
  Generator g(cfg.gen);
  g.init(mix_seed(cfg.seed, 1));
  Discriminator d(cfg.disc);
  d.init(mix_seed(cfg.seed, 2));
  PerceptualNet perc(cfg.perc_base_width, mix_seed(cfg.seed, 3));
  std::unique_ptr<Discriminator> d_coarse;
  if (multi) {
    DiscriminatorConfig dc = cfg.disc;
    dc.scale = GanScale::kSingle;
    d_coarse = std::make_unique<Discriminator>(dc);
    d_coarse->init(mix_seed(cfg.seed, 4));
  }

  // Resume state.
  const fs::path latest = fs::path(ckpt_dir) / "latest.dtmo";
  std::vector<NamedTensorData> resume_tensors;
  int phase = multi ? 1 : 2;
  int start_epoch = 1;
  std::string last_ckpt;
  if (fs::exists(latest)) {
    resume_tensors = nn::read_checkpoint(latest);
    const CkptMeta meta = detail::read_meta(resume_tensors);
    validate_meta(meta, cfg);
    if (!multi && meta.phase != 2)
      throw DataError("single-scale training cannot resume a phase-1 checkpoint");
    g.load(resume_tensors);
    phase = meta.phase;
    start_epoch = meta.epoch + 1;
    last_ckpt = latest.string();
  }

  const fs::path log_path = fs::path(ckpt_dir) / "loss_log.csv";
  const bool fresh_log = resume_tensors.empty() || !fs::exists(log_path);
  std::ofstream log(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot open loss log " + log_path.string());
  if (fresh_log) {
    log << "# seed=" << cfg.seed << "\n";
    log << "epoch,step,d_loss,g_adv,g_fm,g_prp,lr\n";
  }

  CkptMeta meta;
  meta.scale = cfg.gen.scale;
  meta.base_width = cfg.gen.base_width;
  meta.n_resblocks = cfg.gen.n_resblocks;
  meta.n_down = cfg.gen.n_down;
  meta.norm = cfg.gen.norm;
  meta.d_base_width = cfg.disc.base_width;
  meta.d_layers = cfg.disc.n_layers;
  meta.perc_base_width = cfg.perc_base_width;
  meta.input_norm = cfg.input_norm.variant;
  meta.input_norm_eps = cfg.input_norm.epsilon;
  meta.seed = cfg.seed;

  const std::vector<NamedParam> coarse_params = g.coarse_parameters();

  auto run_phase = [&](int ph, int total_epochs, int first_epoch,
                       Discriminator& dd,
                       const std::function<Tensor(const Tensor&)>& gen_fwd,
                       std::vector<NamedParam> g_params, bool pool_inputs,
                       const std::function<const std::vector<NamedParam>*(int)>&
                           frozen_for_epoch) {
    if (first_epoch > total_epochs) return;
    nn::AdamConfig ac;
    ac.lr = cfg.lr;
    ac.beta1 = cfg.beta1;
    ac.beta2 = cfg.beta2;
    nn::Adam opt_g(std::move(g_params), ac);
    nn::Adam opt_d(dd.parameters(), ac);
    if (first_epoch > 1) {  // mid-phase resume
      opt_g.load_state("opt_g.", resume_tensors);
      opt_d.load_state("opt_d.", resume_tensors);
      dd.load(extract_prefixed(resume_tensors, "disc."));
    } else {
      log << "# phase " << ph << "\n";
    }
    for (int e = first_epoch; e <= total_epochs; ++e) {
      const double lr = phase_lr(cfg.lr, e, cfg.warm_epochs, total_epochs);
      opt_g.set_lr(lr);
      opt_d.set_lr(lr);
      it.seek(e, 0);
      const std::vector<NamedParam>* frozen = frozen_for_epoch(e);
      for (int s = 0; s < it.steps_per_epoch(); ++s) {
        std::vector<TrainingPair> batch = it.next();
        Tensor x = stack_x(batch);
        Tensor y = stack_y(batch);
        if (pool_inputs) {
          x = nn::avg_pool2(x);
          y = nn::avg_pool2(y);
        }
        StepReport rep;
        try {
          rep = run_step(gen_fwd, dd, perc, x, y, cfg.weights, opt_g, opt_d,
                         frozen);
        } catch (const NumericError& err) {
          throw NumericError(std::string(err.what()) +
                             "; last good checkpoint: " +
                             (last_ckpt.empty() ? "<none>" : last_ckpt));
        }
        log << e << ',' << s << ',' << format_double(rep.d_loss) << ','
            << format_double(rep.g_adv) << ',' << format_double(rep.g_fm) << ','
            << format_double(rep.g_perc) << ',' << format_double(lr) << '\n';
        log.flush();
      }
      if (e % cfg.ckpt_every == 0 || e == total_epochs) {
        meta.phase = ph;
        meta.epoch = e;
        last_ckpt = write_ckpt(ckpt_dir, g, dd, opt_g, opt_d, meta);
      }
    }
  };

  if (multi && phase == 1) {
    run_phase(
        1, cfg.phase1_epochs, start_epoch, *d_coarse,
        [&g](const Tensor& in) { return g.forward_coarse(in); }, coarse_params,
        /*pool_inputs=*/true, [](int) { return nullptr; });
    phase = 2;
    start_epoch = 1;
    resume_tensors.clear();
  }

  run_phase(
      2, cfg.epochs, start_epoch, d,
      [&g](const Tensor& in) { return g.forward(in); }, g.parameters(),
      /*pool_inputs=*/false,
      [&](int e) -> const std::vector<NamedParam>* {
        if (multi && e <= cfg.freeze_coarse_epochs) return &coarse_params;
        return nullptr;
      });

  if (last_ckpt.empty()) last_ckpt = latest.string();
  return fs::path(last_ckpt);
}

}  // namespace tonematch::gan
