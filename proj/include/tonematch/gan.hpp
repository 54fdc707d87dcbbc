#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tonematch/dataset.hpp"
#include "tonematch/image.hpp"
#include "tonematch/nn/checkpoint.hpp"
#include "tonematch/nn/gradcheck.hpp"
#include "tonematch/nn/layers.hpp"
#include "tonematch/nn/optim.hpp"
#include "tonematch/nn/tensor.hpp"

namespace tonematch::gan {

using nn::NamedParam;
using nn::NamedTensorData;
using nn::Tensor;

enum class GanScale { kSingle, kMulti };

struct GeneratorConfig {
  GanScale scale = GanScale::kSingle;
  int base_width = 8;   // paper-scale 64; every layer width is a multiple
  int n_resblocks = 9;
  int n_down = 4;       // encoder stride-2 stages (decoder mirrors them)
  nn::NormKind norm = nn::NormKind::kInstance;
};

struct DiscriminatorConfig {
  GanScale scale = GanScale::kSingle;  // kMulti adds a 2x-downsampled copy
  int base_width = 8;
  int n_layers = 4;  // widths base*(1,2,4,8), strides (2,2,2,1) at defaults
};

struct LossWeights {
  double fm = 10.0;
  double perceptual = 10.0;
};

// Encoder / residual trunk / decoder triple shared by the generator variants.
struct GeneratorCore {
  GeneratorCore(int in_c, int width, int n_down, int n_res, nn::NormKind norm);
  nn::Sequential front;  // 7x7 stem + stride-2 downsamplers, reflect-padded
  nn::Sequential res;    // residual trunk at width * 2^n_down
  nn::Sequential back;   // mirrored transposed convs + 7x7 head + tanh
  Tensor forward(const Tensor& x);  // full pass incl. [-1,1] -> [0,1] rescale
  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Single scale: front -> res -> back on the full-resolution plane.
// Multi scale: a coarse core (double width, one fewer downsampler) runs on the
// 2x-pooled input; its post-residual bottleneck is summed into the fine
// core's encoder output, which then continues through the fine trunk and
// decoder. Both bottlenecks live at 1/16 resolution and 16*base channels, so
// the sum is well-formed. With the coarse contribution ablated the fine path
// is exactly the single-scale network.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg);

  const GeneratorConfig& config() const { return cfg_; }
  Tensor forward(const Tensor& x);
  // Standalone pass through the coarse core (multi only); the input is
  // expected at half resolution already.
  Tensor forward_coarse(const Tensor& x_half);

  void set_ablate_coarse(bool on);

  std::vector<NamedParam> parameters() const;         // fine core first
  std::vector<NamedParam> coarse_parameters() const;  // empty for single
  void init(std::uint64_t seed);

  std::vector<NamedTensorData> state() const;
  void load(const std::vector<NamedTensorData>& tensors);

 private:
  GeneratorConfig cfg_;
  std::unique_ptr<GeneratorCore> fine_;    // "g" (single) / "g.o" (multi)
  std::unique_ptr<GeneratorCore> coarse_;  // "g.d" (multi only)
  bool ablate_coarse_ = false;
};

struct DiscriminatorOutput {
  std::vector<Tensor> taps;  // post-activation features, final logits last
  Tensor logits;
};

// PatchGAN over concat(hdr, ldr). Multi-scale runs an independently
// parameterized copy on the 2x-pooled concat.
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorConfig& cfg);

  const DiscriminatorConfig& config() const { return cfg_; }
  std::vector<DiscriminatorOutput> forward(const Tensor& hdr, const Tensor& ldr);

  std::vector<NamedParam> parameters() const;
  void init(std::uint64_t seed);

  std::vector<NamedTensorData> state() const;
  void load(const std::vector<NamedTensorData>& tensors);

 private:
  struct Net {
    std::vector<std::unique_ptr<nn::Module>> layers;
    std::vector<bool> is_tap;  // tap after this layer?
  };
  Net build_net() const;
  DiscriminatorOutput run(Net& net, const Tensor& cat) const;

  DiscriminatorConfig cfg_;
  std::vector<Net> nets_;  // [original] or [original, downsampled]
};

// Fixed, seeded convolutional feature stack standing in for a pretrained
// perceptual backbone: eight 3x3 convs (widths b,b,2b,2b,4b,4b,8b,8b, stride 2
// entering each width change after the first pair), ReLU between, He-style
// init, taps after every second activation. Parameters never train.
class PerceptualNet {
 public:
  explicit PerceptualNet(int base = 8, std::uint64_t seed = 0x9e3779b9u);
  std::vector<Tensor> features(const Tensor& x);
  std::size_t parameter_count() const;
  int base() const { return base_; }

 private:
  int base_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<int> strides_;
};

// --- losses -----------------------------------------------------------------

// Mean squared error of logits against 1 (real) / 0 (fake).
Tensor lsgan_loss(const Tensor& logits, bool target_real);

// Feature matching: sum over scales and taps of mean-abs differences; the
// real-side features are detached (no gradient to D from this term).
Tensor fm_loss(const std::vector<DiscriminatorOutput>& real,
               const std::vector<DiscriminatorOutput>& fake);

Tensor perceptual_loss(const Tensor& y, const Tensor& g_x, PerceptualNet& net);

// --- batch helpers ----------------------------------------------------------

Tensor stack_x(const std::vector<TrainingPair>& batch, bool requires_grad = false);
Tensor stack_y(const std::vector<TrainingPair>& batch);
Raster raster_from_tensor(const Tensor& t, int n = 0, int c = 0);
Tensor tensor_from_raster(const Raster& r, bool requires_grad = false);

// --- training ---------------------------------------------------------------

struct StepReport {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_fm = 0.0;
  double g_perc = 0.0;
  double g_total = 0.0;  // the graph's own scalar: adv + fm_w*fm + perc_w*perc
};

// One alternating step: D first on the detached fake, then G on the composite
// objective. `frozen` parameters get their gradients zeroed before the G
// update, which together with zero-initialized Adam moments pins them.
StepReport train_step(Generator& g, Discriminator& d, PerceptualNet& p,
                      const Tensor& x, const Tensor& y, const LossWeights& w,
                      nn::Adam& opt_g, nn::Adam& opt_d,
                      const std::vector<NamedParam>* frozen = nullptr);

struct TrainConfig {
  GeneratorConfig gen;
  DiscriminatorConfig disc;
  LossWeights weights;
  int perc_base_width = 8;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int epochs = 200;
  int warm_epochs = 100;     // lr constant through here, then linear to 0
  int batch = -1;            // -1: 4 for single scale, 1 for multi
  std::uint64_t seed = 0;
  int ckpt_every = 10;       // epochs between checkpoints
  int freeze_coarse_epochs = 20;  // multi phase 2
  int phase1_epochs = -1;    // multi: coarse-only pretraining; -1 = epochs
  NormalizationMode input_norm{NormalizationVariant::kLog, 1e-6f};
  int resize_h = -1, resize_w = -1, crop_h = -1, crop_w = -1;  // -1: per-scale
  int scale_div = 1;         // desk-scale divisor applied to the geometry
  float flip_prob = 0.5f;

  void finalize();  // resolves -1 defaults, validates
};

TrainConfig parse_train_config(const std::filesystem::path& path);

// Epoch loop with checkpoints + CSV loss log in ckpt_dir; resumes from
// ckpt_dir/latest.dtmo when present. Returns the last checkpoint path.
std::filesystem::path train(const TrainConfig& cfg, const std::string& data_dir,
                            const std::string& ckpt_dir);

// --- inference ---------------------------------------------------------------

// Rebuilds the generator recorded in the checkpoint, tone-maps the luminance
// plane (input padded by reflection to the alignment the downsampling chain
// needs, output cropped back), and re-applies color with the given
// saturation. When `seconds` is non-null it receives the wall time of the
// tone-mapping pass itself (normalize + forward + color, excluding model
// construction).
LdrImage infer(const std::filesystem::path& ckpt, const HdrImage& hdr,
               float saturation, double* seconds = nullptr);

}  // namespace tonematch::gan
