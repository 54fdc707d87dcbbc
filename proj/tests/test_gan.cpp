#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "tonematch/common.hpp"
#include "tonematch/gan.hpp"
#include "tonematch/image.hpp"
#include "tonematch/io.hpp"
#include "tonematch/rng.hpp"

using namespace tonematch;
using namespace tonematch::gan;
namespace nn = tonematch::nn;
namespace fs = std::filesystem;

namespace {

nn::Tensor random_input(int n, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(static_cast<std::size_t>(n) * h * w);
  for (float& x : v) x = rng.uniform();
  return nn::Tensor::from_values({n, 1, h, w}, std::move(v), false);
}

GeneratorConfig tiny_gen(GanScale scale) {
  GeneratorConfig cfg;
  cfg.scale = scale;
  cfg.base_width = 2;
  cfg.n_resblocks = 1;
  cfg.n_down = 2;
  return cfg;
}

DiscriminatorConfig tiny_disc(GanScale scale) {
  DiscriminatorConfig cfg;
  cfg.scale = scale;
  cfg.base_width = 2;
  cfg.n_layers = 2;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tonematch_gan_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("single-scale generator keeps shape and range") {
  Generator g(tiny_gen(GanScale::kSingle));
  g.init(1);
  const nn::Tensor x = random_input(1, 32, 48, 2);
  const nn::Tensor y = g.forward(x);
  CHECK(y.shape() == x.shape());
  for (float v : y.values()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("multi-scale coarse branch runs at exactly half resolution") {
  Generator g(tiny_gen(GanScale::kMulti));
  g.init(3);
  const nn::Tensor x = random_input(1, 32, 64, 4);
  const nn::Tensor coarse = g.forward_coarse(nn::avg_pool2(x));
  CHECK(coarse.shape().h == 16);
  CHECK(coarse.shape().w == 32);
  const nn::Tensor joint = g.forward(x);
  CHECK(joint.shape() == x.shape());
}

TEST_CASE("ablated multi-scale generator bit-matches the single-scale one") {
  Generator single(tiny_gen(GanScale::kSingle));
  Generator multi(tiny_gen(GanScale::kMulti));
  single.init(7);
  multi.init(7);
  multi.set_ablate_coarse(true);
  const nn::Tensor x = random_input(1, 24, 24, 8);
  CHECK(single.forward(x).values() == multi.forward(x).values());
}

TEST_CASE("multi-scale parameters lead with the fine branch") {
  Generator single(tiny_gen(GanScale::kSingle));
  Generator multi(tiny_gen(GanScale::kMulti));
  const auto ps = single.parameters();
  const auto pm = multi.parameters();
  REQUIRE(pm.size() > ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    // same suffix under the fine-branch prefix, same element count
    CHECK(pm[i].name == "g.o" + ps[i].name.substr(1));
    CHECK(pm[i].tensor.numel() == ps[i].tensor.numel());
  }
  for (std::size_t i = ps.size(); i < pm.size(); ++i)
    CHECK(pm[i].name.rfind("g.d.", 0) == 0);
}

TEST_CASE("discriminator logit map follows the stride arithmetic") {
  Discriminator d(tiny_disc(GanScale::kSingle));
  d.init(9);
  const nn::Tensor hdr = random_input(1, 32, 32, 10);
  const nn::Tensor ldr = random_input(1, 32, 32, 11);
  const auto outs = d.forward(hdr, ldr);
  REQUIRE(outs.size() == 1);
  // two stride-2 4x4 zero-pad-1 blocks (16 -> 8 at layer 2? no: last block is
  // stride 1) -> 32 -> 16 -> 15, then the 4x4 head: 14
  CHECK(outs[0].logits.shape().h == 14);
  CHECK(outs[0].logits.shape().w == 14);
  CHECK(outs[0].logits.shape().c == 1);
  CHECK(static_cast<int>(outs[0].taps.size()) == 3);  // 2 LReLU taps + logits
}

TEST_CASE("multi-scale discriminator adds a half-resolution net") {
  Discriminator d(tiny_disc(GanScale::kMulti));
  d.init(12);
  const nn::Tensor hdr = random_input(1, 32, 32, 13);
  const nn::Tensor ldr = random_input(1, 32, 32, 14);
  const auto outs = d.forward(hdr, ldr);
  REQUIRE(outs.size() == 2);
  // same stride arithmetic applied at half resolution: 16 -> 8 -> 7 -> 6
  CHECK(outs[0].logits.shape().h == 14);
  CHECK(outs[1].logits.shape().h == 6);
  CHECK(outs[1].logits.shape().w == 6);
}

TEST_CASE("identical pairs give identical logits") {
  Discriminator d(tiny_disc(GanScale::kSingle));
  d.init(20);
  const nn::Tensor hdr = random_input(1, 16, 16, 21);
  const nn::Tensor ldr = random_input(1, 16, 16, 22);
  const auto a = d.forward(hdr, ldr);
  const auto b = d.forward(hdr, ldr);
  CHECK(a[0].logits.values() == b[0].logits.values());
}

TEST_CASE("lsgan loss anchors and oracle") {
  const nn::Tensor ones = nn::Tensor::full({1, 1, 3, 3}, 1.0f);
  const nn::Tensor zeros = nn::Tensor::zeros({1, 1, 3, 3});
  CHECK(lsgan_loss(ones, true).scalar() == doctest::Approx(0.0));
  CHECK(lsgan_loss(zeros, true).scalar() == doctest::Approx(1.0));
  CHECK(lsgan_loss(zeros, false).scalar() == doctest::Approx(0.0));

  Rng rng(30);
  std::vector<float> v(12);
  for (float& x : v) x = rng.uniform() * 4.0f - 2.0f;
  const nn::Tensor logits = nn::Tensor::from_values({1, 1, 3, 4}, v);
  double want = 0.0;
  for (float x : v) want += (x - 1.0) * (x - 1.0);
  want /= v.size();
  CHECK(lsgan_loss(logits, true).scalar() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("feature matching loss anchors and oracle") {
  DiscriminatorOutput real, fake;
  real.taps.push_back(nn::Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}));
  fake.taps.push_back(nn::Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}));
  real.logits = real.taps[0];
  fake.logits = fake.taps[0];
  CHECK(fm_loss({real}, {fake}).scalar() == doctest::Approx(0.0));

  DiscriminatorOutput r2, f2;
  r2.taps.push_back(nn::Tensor::from_values({1, 1, 2, 2}, {0, 1, 0, 1}));
  f2.taps.push_back(nn::Tensor::from_values({1, 1, 2, 2}, {1, 0, 1, 2}));
  r2.logits = r2.taps[0];
  f2.logits = f2.taps[0];
  // mean |diff| over U=4 elements with abs diffs (1,1,1,1) = 1
  CHECK(fm_loss({r2}, {f2}).scalar() == doctest::Approx(1.0));

  Rng rng(31);
  DiscriminatorOutput r3, f3;
  double want = 0.0;
  for (int t = 0; t < 2; ++t) {
    std::vector<float> a(8), b(8);
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) {
      a[static_cast<std::size_t>(i)] = rng.uniform();
      b[static_cast<std::size_t>(i)] = rng.uniform();
      acc += std::fabs(double(a[static_cast<std::size_t>(i)]) - b[static_cast<std::size_t>(i)]);
    }
    r3.taps.push_back(nn::Tensor::from_values({1, 2, 2, 2}, a));
    f3.taps.push_back(nn::Tensor::from_values({1, 2, 2, 2}, b));
    want += acc / 8.0;
  }
  r3.logits = r3.taps[1];
  f3.logits = f3.taps[1];
  CHECK(fm_loss({r3}, {f3}).scalar() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("perceptual loss anchors, symmetry, oracle") {
  PerceptualNet net(2, 77);
  const nn::Tensor a = random_input(1, 16, 16, 40);
  const nn::Tensor b = random_input(1, 16, 16, 41);
  CHECK(perceptual_loss(a, a, net).scalar() == doctest::Approx(0.0));
  CHECK(perceptual_loss(a, b, net).scalar() ==
        doctest::Approx(perceptual_loss(b, a, net).scalar()).epsilon(1e-12));

  // composition oracle: forward both, L1 per tap, summed
  const auto ta = net.features(a);
  const auto tb = net.features(b);
  REQUIRE(ta.size() == 4);
  double want = 0.0;
  for (std::size_t t = 0; t < ta.size(); ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ta[t].numel(); ++i)
      acc += std::fabs(double(ta[t].values()[i]) - tb[t].values()[i]);
    want += acc / double(ta[t].numel());
  }
  CHECK(perceptual_loss(a, b, net).scalar() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("perceptual net is frozen") {
  PerceptualNet net(2, 78);
  CHECK(net.parameter_count() > 0);
  const nn::Tensor x = random_input(1, 16, 16, 42);
  const auto taps = net.features(x);
  for (const auto& t : taps) CHECK(!t.requires_grad());
}

TEST_CASE("zero-weight losses degenerate the step to pure lsgan") {
  Generator g(tiny_gen(GanScale::kSingle));
  Discriminator d(tiny_disc(GanScale::kSingle));
  PerceptualNet p(2, 80);
  g.init(81);
  d.init(82);
  nn::Adam opt_g(g.parameters(), {});
  nn::Adam opt_d(d.parameters(), {});
  const nn::Tensor x = random_input(1, 16, 16, 83);
  const nn::Tensor y = random_input(1, 16, 16, 84);
  const StepReport rep = train_step(g, d, p, x, y, {0.0, 0.0}, opt_g, opt_d);
  CHECK(rep.g_total == doctest::Approx(rep.g_adv).epsilon(1e-12));
}

TEST_CASE("training step is deterministic") {
  StepReport reports[2];
  for (int run = 0; run < 2; ++run) {
    Generator g(tiny_gen(GanScale::kSingle));
    Discriminator d(tiny_disc(GanScale::kSingle));
    PerceptualNet p(2, 90);
    g.init(91);
    d.init(92);
    nn::Adam opt_g(g.parameters(), {});
    nn::Adam opt_d(d.parameters(), {});
    const nn::Tensor x = random_input(1, 16, 16, 93);
    const nn::Tensor y = random_input(1, 16, 16, 94);
    reports[run] = train_step(g, d, p, x, y, {}, opt_g, opt_d);
  }
  CHECK(reports[0].d_loss == reports[1].d_loss);
  CHECK(reports[0].g_adv == reports[1].g_adv);
  CHECK(reports[0].g_fm == reports[1].g_fm);
  CHECK(reports[0].g_perc == reports[1].g_perc);
  CHECK(reports[0].g_total == reports[1].g_total);
}

TEST_CASE("loss decomposition holds at double precision") {
  Generator g(tiny_gen(GanScale::kSingle));
  Discriminator d(tiny_disc(GanScale::kSingle));
  PerceptualNet p(2, 95);
  g.init(96);
  d.init(97);
  nn::Adam opt_g(g.parameters(), {});
  nn::Adam opt_d(d.parameters(), {});
  for (int step = 0; step < 3; ++step) {
    const nn::Tensor x = random_input(1, 16, 16, 98 + static_cast<std::uint64_t>(step));
    const nn::Tensor y = random_input(1, 16, 16, 198 + static_cast<std::uint64_t>(step));
    const LossWeights w{10.0, 10.0};
    const StepReport rep = train_step(g, d, p, x, y, w, opt_g, opt_d);
    const double recomposed = rep.g_adv + 10.0 * rep.g_fm + 10.0 * rep.g_perc;
    CHECK(std::fabs(rep.g_total - recomposed) <= 1e-6);
  }
}

TEST_CASE("stack and unstack rasters") {
  Rng rng(99);
  std::vector<TrainingPair> batch(2);
  for (TrainingPair& p : batch) {
    p.x = Raster(6, 4);
    p.y = Raster(6, 4);
    for (float& v : p.x.data) v = rng.uniform();
    for (float& v : p.y.data) v = rng.uniform();
  }
  const nn::Tensor xs = stack_x(batch);
  CHECK((xs.shape() == nn::Shape{2, 1, 4, 6}));
  const Raster back = raster_from_tensor(xs, 1, 0);
  CHECK(back.data == batch[1].x.data);
}

TEST_CASE("train config parsing, defaults, and validation") {
  const fs::path dir = fresh_dir("cfg");
  const fs::path path = dir / "train.cfg";
  std::ofstream(path) << "# comment line\n"
                         "scale = single\n"
                         "base_width = 4\n"
                         "epochs = 3\n"
                         "warm_epochs = 2\n"
                         "seed = 17\n";
  TrainConfig cfg = parse_train_config(path);
  CHECK(cfg.gen.base_width == 4);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.seed == 17);
  cfg.finalize();
  CHECK(cfg.batch == 4);         // single-scale default
  CHECK(cfg.crop_h == 512);      // full-scale geometry default
  CHECK(cfg.disc.scale == GanScale::kSingle);

  std::ofstream(dir / "bad.cfg") << "no_such_key = 1\n";
  CHECK_THROWS_AS(parse_train_config(dir / "bad.cfg"), DataError);

  TrainConfig invalid;
  invalid.epochs = 0;
  CHECK_THROWS_AS(invalid.finalize(), DataError);
}

TEST_CASE("scale-div shrinks the augmentation geometry consistently") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.warm_epochs = 1;
  cfg.scale_div = 16;
  cfg.finalize();
  // 700/16 = 43 -> resize floor; crops snap down to a multiple of 1<<n_down
  CHECK(cfg.crop_h % (1 << cfg.gen.n_down) == 0);
  CHECK(cfg.crop_w % (1 << cfg.gen.n_down) == 0);
  CHECK(cfg.resize_h >= cfg.crop_h);
  CHECK(cfg.resize_w >= cfg.crop_w);
}

TEST_CASE("infer reproduces dims, range, and bits") {
  const fs::path data_src = fresh_dir("infer_src");
  const fs::path cache = fresh_dir("infer_cache");
  const fs::path ckpts = fresh_dir("infer_ckpts");

  Rng rng(123);
  HdrImage scene(40, 32, 3);
  for (float& v : scene.data) v = rng.uniform() * 50.0f + 0.05f;
  write_hdr(scene, data_src / "s.pfm", ImageFileFormat::kPfm);
  build_dataset(data_src.string(), cache.string(), {});

  TrainConfig cfg;
  cfg.gen = tiny_gen(GanScale::kSingle);
  cfg.disc = tiny_disc(GanScale::kSingle);
  cfg.perc_base_width = 2;
  cfg.epochs = 1;
  cfg.warm_epochs = 1;
  cfg.batch = 1;
  cfg.seed = 5;
  cfg.ckpt_every = 1;
  cfg.resize_h = 32;
  cfg.resize_w = 40;
  cfg.crop_h = 16;
  cfg.crop_w = 16;
  const fs::path last = train(cfg, cache.string(), ckpts.string());
  CHECK(fs::exists(last));

  // dims not a multiple of the downsampling stride: 37x29 forces padding
  HdrImage odd(37, 29, 3);
  Rng rng2(9);
  for (float& v : odd.data) v = rng2.uniform() * 10.0f + 0.01f;
  double seconds = -1.0;
  const LdrImage out = infer(ckpts / "latest.dtmo", odd, 0.8f, &seconds);
  CHECK(out.width == 37);
  CHECK(out.height == 29);
  CHECK(out.channels == 3);
  CHECK(seconds > 0.0);
  out.validate();

  const LdrImage again = infer(ckpts / "latest.dtmo", odd, 0.8f, nullptr);
  CHECK(again.data == out.data);

  // single-channel input comes back single-channel
  HdrImage gray(24, 20, 1);
  for (float& v : gray.data) v = rng2.uniform() + 0.01f;
  const LdrImage gout = infer(ckpts / "latest.dtmo", gray, 1.0f, nullptr);
  CHECK(gout.channels == 1);
}

TEST_CASE("checkpoint meta mismatches are rejected at resume") {
  const fs::path data_src = fresh_dir("meta_src");
  const fs::path cache = fresh_dir("meta_cache");
  const fs::path ckpts = fresh_dir("meta_ckpts");

  Rng rng(321);
  HdrImage scene(32, 32, 3);
  for (float& v : scene.data) v = rng.uniform() * 20.0f + 0.1f;
  write_hdr(scene, data_src / "s.pfm", ImageFileFormat::kPfm);
  build_dataset(data_src.string(), cache.string(), {});

  TrainConfig cfg;
  cfg.gen = tiny_gen(GanScale::kSingle);
  cfg.disc = tiny_disc(GanScale::kSingle);
  cfg.perc_base_width = 2;
  cfg.epochs = 1;
  cfg.warm_epochs = 1;
  cfg.batch = 1;
  cfg.seed = 5;
  cfg.resize_h = 32;
  cfg.resize_w = 32;
  cfg.crop_h = 16;
  cfg.crop_w = 16;
  train(cfg, cache.string(), ckpts.string());

  TrainConfig other = cfg;
  other.gen.base_width = 4;
  other.epochs = 2;
  CHECK_THROWS_AS(train(other, cache.string(), ckpts.string()), DataError);
}

TEST_CASE("downsampling front receptive field grows with depth") {
  // Mirror of the generator front-end geometry (7x7 stem, then 3x3 stride-2
  // downsamplers) built from bare convolutions with all-positive weights, so
  // the gradient support of one bottleneck pixel is exactly the receptive
  // field: 7, then r -> r + 2*jump with the jump doubling per downsampler.
  const int kInput = 96;
  int expected_r = 7;
  int jump = 1;
  std::size_t prev_support = 0;
  for (int depth = 0; depth <= 4; ++depth) {
    nn::Tensor x = nn::Tensor::full({1, 1, kInput, kInput}, 0.5f, true);
    nn::Tensor w7 = nn::Tensor::full({1, 1, 7, 7}, 0.01f);
    nn::Tensor b = nn::Tensor::zeros({1, 1, 1, 1});
    nn::Tensor t = nn::conv2d(x, w7, b, 1, 3, nn::PadMode::kZero);
    for (int i = 0; i < depth; ++i) {
      nn::Tensor w3 = nn::Tensor::full({1, 1, 3, 3}, 0.1f);
      t = nn::conv2d(t, w3, b, 2, 1, nn::PadMode::kZero);
    }
    const int hw = t.shape().h;
    // A one-hot kernel the size of the map picks out the center pixel.
    std::vector<float> mask(static_cast<std::size_t>(hw) * hw, 0.0f);
    mask[static_cast<std::size_t>(hw / 2) * hw + hw / 2] = 1.0f;
    nn::Tensor onehot = nn::Tensor::from_values({1, 1, hw, hw}, std::move(mask));
    nn::Tensor probe =
        nn::sum_all(nn::conv2d(t, onehot, b, 1, 0, nn::PadMode::kZero));
    probe.backward();
    std::size_t support = 0;
    for (float g : x.grad())
      if (g != 0.0f) ++support;
    CHECK(support == static_cast<std::size_t>(expected_r) * expected_r);
    CHECK(support > prev_support);
    prev_support = support;
    expected_r += 2 * jump;
    jump *= 2;
  }
}

namespace {

// Closed-form parameter counts, written as plain arithmetic over the config
// so any structural drift in the builders shows up as a mismatch.
std::size_t core_param_count(int w, int n_down, int n_res) {
  std::size_t n = 49ull * w + w + 2ull * w;  // 7x7 stem conv + norm
  for (int i = 0; i < n_down; ++i) {
    const std::size_t ci = static_cast<std::size_t>(w) << i;
    const std::size_t co = ci * 2;
    n += 9 * ci * co + co + 2 * co;
  }
  const std::size_t t = static_cast<std::size_t>(w) << n_down;
  n += static_cast<std::size_t>(n_res) * (18 * t * t + 4 * t);
  for (int i = 0; i < n_down; ++i) {
    const std::size_t ci = static_cast<std::size_t>(w) << (n_down - i);
    const std::size_t co = ci / 2;
    n += 9 * ci * co + co + 2 * co;
  }
  n += 49ull * w + 1;  // 7x7 head conv
  return n;
}

std::size_t gen_param_count(const GeneratorConfig& cfg) {
  std::size_t n = core_param_count(cfg.base_width, cfg.n_down, cfg.n_resblocks);
  if (cfg.scale == GanScale::kMulti)
    n += core_param_count(2 * cfg.base_width, cfg.n_down - 1, cfg.n_resblocks);
  return n;
}

std::size_t disc_param_count(const DiscriminatorConfig& cfg) {
  std::size_t per_net = 0;
  std::size_t ci = 2;
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::size_t co =
        static_cast<std::size_t>(cfg.base_width) * (i < 3 ? (1u << i) : 8u);
    per_net += 16 * ci * co + co;
    if (i > 0) per_net += 2 * co;
    ci = co;
  }
  per_net += 16 * ci + 1;
  return cfg.scale == GanScale::kMulti ? 2 * per_net : per_net;
}

std::size_t perc_param_count(int b) {
  const int widths[8] = {b, b, 2 * b, 2 * b, 4 * b, 4 * b, 8 * b, 8 * b};
  std::size_t n = 0;
  std::size_t ci = 1;
  for (int i = 0; i < 8; ++i) {
    n += 9 * ci * widths[i] + widths[i];
    ci = widths[i];
  }
  return n;
}

std::size_t total_numel(const std::vector<nn::NamedParam>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

}  // namespace

TEST_CASE("parameter counts match their closed forms across widths") {
  for (const int w : {2, 4, 8}) {
    for (const GanScale scale : {GanScale::kSingle, GanScale::kMulti}) {
      GeneratorConfig gc;
      gc.scale = scale;
      gc.base_width = w;
      gc.n_resblocks = 3;
      gc.n_down = scale == GanScale::kMulti ? 3 : 2;
      Generator g(gc);
      CHECK(total_numel(g.parameters()) == gen_param_count(gc));

      DiscriminatorConfig dc;
      dc.scale = scale;
      dc.base_width = w;
      dc.n_layers = 4;
      Discriminator d(dc);
      CHECK(total_numel(d.parameters()) == disc_param_count(dc));
    }
    PerceptualNet perc(w, 77);
    CHECK(perc.parameter_count() == perc_param_count(w));
  }
  // Defaults as published in the architecture table.
  Generator g_default{GeneratorConfig{}};
  CHECK(total_numel(g_default.parameters()) == gen_param_count(GeneratorConfig{}));
  Discriminator d_default{DiscriminatorConfig{}};
  CHECK(total_numel(d_default.parameters()) == disc_param_count(DiscriminatorConfig{}));
}
