#include "tonematch/gan.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tonematch/common.hpp"
#include "tonematch/rng.hpp"

namespace tonematch::gan {

namespace {

using nn::Conv2d;
using nn::ConvTranspose2d;
using nn::LeakyReLULayer;
using nn::Module;
using nn::PadMode;
using nn::ReLULayer;
using nn::ResidualBlock;
using nn::Sequential;
using nn::Shape;
using nn::TanhLayer;

void check_gen_config(const GeneratorConfig& cfg) {
  if (cfg.base_width < 1) throw DataError("generator base_width must be >= 1");
  if (cfg.n_resblocks < 0) throw DataError("generator n_resblocks must be >= 0");
  if (cfg.n_down < 1) throw DataError("generator n_down must be >= 1");
  if (cfg.scale == GanScale::kMulti && cfg.n_down < 2)
    throw DataError("multi-scale generator needs n_down >= 2");
}

void check_disc_config(const DiscriminatorConfig& cfg) {
  if (cfg.base_width < 1) throw DataError("discriminator base_width must be >= 1");
  if (cfg.n_layers < 2) throw DataError("discriminator n_layers must be >= 2");
}

std::vector<NamedTensorData> params_to_state(const std::vector<NamedParam>& params) {
  std::vector<NamedTensorData> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    const Shape& s = p.tensor.shape();
    NamedTensorData rec;
    rec.name = p.name;
    rec.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    rec.values = p.tensor.values();
    out.push_back(std::move(rec));
  }
  return out;
}

void state_to_params(const std::vector<NamedTensorData>& tensors,
                     const std::vector<NamedParam>& params) {
  for (const auto& p : params) {
    const NamedTensorData& rec = nn::find_tensor(tensors, p.name);
    if (rec.values.size() != p.tensor.numel())
      throw DataError("checkpoint tensor '" + p.name + "' has " +
                      std::to_string(rec.values.size()) + " values, expected " +
                      std::to_string(p.tensor.numel()));
    Tensor t = p.tensor;
    std::copy(rec.values.begin(), rec.values.end(), t.mutable_values().begin());
  }
}

}  // namespace

GeneratorCore::GeneratorCore(int in_c, int width, int n_down, int n_res,
                             nn::NormKind norm) {
  front.emplace<Conv2d>("stem.conv", in_c, width, 7, 1, 3, PadMode::kReflect);
  front.emplace_named("stem.norm", nn::make_norm(norm, width));
  front.emplace<ReLULayer>("stem.act");
  for (int i = 0; i < n_down; ++i) {
    const int ci = width << i;
    const int co = width << (i + 1);
    const std::string tag = "down" + std::to_string(i);
    front.emplace<Conv2d>(tag + ".conv", ci, co, 3, 2, 1, PadMode::kReflect);
    front.emplace_named(tag + ".norm", nn::make_norm(norm, co));
    front.emplace<ReLULayer>(tag + ".act");
  }
  const int trunk = width << n_down;
  for (int i = 0; i < n_res; ++i)
    res.emplace<ResidualBlock>("res" + std::to_string(i), trunk, norm);
  for (int i = 0; i < n_down; ++i) {
    const int ci = width << (n_down - i);
    const int co = width << (n_down - i - 1);
    const std::string tag = "up" + std::to_string(i);
    back.emplace<ConvTranspose2d>(tag + ".conv", ci, co, 3, 2, 1);
    back.emplace_named(tag + ".norm", nn::make_norm(norm, co));
    back.emplace<ReLULayer>(tag + ".act");
  }
  back.emplace<Conv2d>("head.conv", width, in_c, 7, 1, 3, PadMode::kReflect);
  back.emplace<TanhLayer>("head.act");
}

Tensor GeneratorCore::forward(const Tensor& x) {
  Tensor t = back.forward(res.forward(front.forward(x)));
  return nn::add_scalar(nn::scale(t, 0.5), 0.5);  // tanh range -> [0,1]
}

void GeneratorCore::collect(const std::string& prefix,
                            std::vector<NamedParam>& out) const {
  front.collect(prefix + ".front", out);
  res.collect(prefix + ".res", out);
  back.collect(prefix + ".back", out);
}

Generator::Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
  check_gen_config(cfg_);
  fine_ = std::make_unique<GeneratorCore>(1, cfg_.base_width, cfg_.n_down,
                                          cfg_.n_resblocks, cfg_.norm);
  if (cfg_.scale == GanScale::kMulti) {
    // Same bottleneck geometry as the fine core: double width, one fewer
    // downsampler, fed with the 2x-pooled input.
    coarse_ = std::make_unique<GeneratorCore>(1, 2 * cfg_.base_width,
                                              cfg_.n_down - 1, cfg_.n_resblocks,
                                              cfg_.norm);
  }
}

Tensor Generator::forward(const Tensor& x) {
  Tensor bottleneck = fine_->front.forward(x);
  if (coarse_ && !ablate_coarse_) {
    Tensor pooled = nn::avg_pool2(x);
    Tensor coarse_feat = coarse_->res.forward(coarse_->front.forward(pooled));
    bottleneck = nn::add(bottleneck, coarse_feat);
  }
  Tensor t = fine_->back.forward(fine_->res.forward(bottleneck));
  return nn::add_scalar(nn::scale(t, 0.5), 0.5);
}

Tensor Generator::forward_coarse(const Tensor& x_half) {
  if (!coarse_) throw DataError("forward_coarse requires a multi-scale generator");
  return coarse_->forward(x_half);
}

void Generator::set_ablate_coarse(bool on) {
  if (on && !coarse_)
    throw DataError("ablate_coarse requires a multi-scale generator");
  ablate_coarse_ = on;
}

std::vector<NamedParam> Generator::parameters() const {
  std::vector<NamedParam> out;
  if (coarse_) {
    fine_->collect("g.o", out);
    coarse_->collect("g.d", out);
  } else {
    fine_->collect("g", out);
  }
  return out;
}

std::vector<NamedParam> Generator::coarse_parameters() const {
  std::vector<NamedParam> out;
  if (coarse_) coarse_->collect("g.d", out);
  return out;
}

void Generator::init(std::uint64_t seed) { nn::init_weights(parameters(), seed); }

std::vector<NamedTensorData> Generator::state() const {
  return params_to_state(parameters());
}

void Generator::load(const std::vector<NamedTensorData>& tensors) {
  state_to_params(tensors, parameters());
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
  check_disc_config(cfg_);
  nets_.push_back(build_net());
  if (cfg_.scale == GanScale::kMulti) nets_.push_back(build_net());
}

Discriminator::Net Discriminator::build_net() const {
  Net net;
  int ci = 2;  // concat(hdr, ldr)
  for (int i = 0; i < cfg_.n_layers; ++i) {
    const int mult = i < 3 ? (1 << i) : 8;
    const int co = cfg_.base_width * mult;
    const int stride = i < cfg_.n_layers - 1 ? 2 : 1;
    net.layers.push_back(std::make_unique<Conv2d>(ci, co, 4, stride, 1, PadMode::kZero));
    net.is_tap.push_back(false);
    if (i > 0) {  // no normalization on the first block
      net.layers.push_back(std::make_unique<nn::InstanceNorm2d>(co));
      net.is_tap.push_back(false);
    }
    net.layers.push_back(std::make_unique<LeakyReLULayer>(0.2f));
    net.is_tap.push_back(true);
    ci = co;
  }
  net.layers.push_back(std::make_unique<Conv2d>(ci, 1, 4, 1, 1, PadMode::kZero));
  net.is_tap.push_back(true);  // logits double as the last feature tap
  return net;
}

DiscriminatorOutput Discriminator::run(Net& net, const Tensor& cat) const {
  DiscriminatorOutput out;
  Tensor t = cat;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    t = net.layers[i]->forward(t);
    if (net.is_tap[i]) out.taps.push_back(t);
  }
  out.logits = t;
  return out;
}

std::vector<DiscriminatorOutput> Discriminator::forward(const Tensor& hdr,
                                                        const Tensor& ldr) {
  Tensor cat = nn::concat_channels(hdr, ldr);
  std::vector<DiscriminatorOutput> outs;
  outs.push_back(run(nets_[0], cat));
  if (nets_.size() > 1) outs.push_back(run(nets_[1], nn::avg_pool2(cat)));
  return outs;
}

std::vector<NamedParam> Discriminator::parameters() const {
  std::vector<NamedParam> out;
  for (std::size_t n = 0; n < nets_.size(); ++n) {
    const std::string prefix = "d" + std::to_string(n);
    int block = 0;
    for (const auto& layer : nets_[n].layers)
      layer->collect(prefix + ".l" + std::to_string(block++), out);
  }
  return out;
}

void Discriminator::init(std::uint64_t seed) {
  nn::init_weights(parameters(), seed);
}

std::vector<NamedTensorData> Discriminator::state() const {
  return params_to_state(parameters());
}

void Discriminator::load(const std::vector<NamedTensorData>& tensors) {
  state_to_params(tensors, parameters());
}

PerceptualNet::PerceptualNet(int base, std::uint64_t seed) : base_(base) {
  if (base < 1) throw DataError("perceptual base width must be >= 1");
  const int widths[8] = {base,     base,     2 * base, 2 * base,
                         4 * base, 4 * base, 8 * base, 8 * base};
  strides_ = {1, 1, 2, 1, 2, 1, 2, 1};
  Rng rng(seed);
  int ci = 1;
  for (int i = 0; i < 8; ++i) {
    auto conv = std::make_unique<Conv2d>(ci, widths[i], 3, strides_[i], 1,
                                         PadMode::kZero);
    const double fan_in = static_cast<double>(ci) * 3.0 * 3.0;
    const float dev = static_cast<float>(std::sqrt(2.0 / fan_in));
    for (auto& v : conv->weight.mutable_values()) v = rng.normal(0.0f, dev);
    // Biases stay zero. Freeze by swapping in non-trainable leaves.
    conv->weight = conv->weight.detach(false);
    conv->bias = conv->bias.detach(false);
    ci = widths[i];
    convs_.push_back(std::move(conv));
  }
}

std::vector<Tensor> PerceptualNet::features(const Tensor& x) {
  std::vector<Tensor> taps;
  Tensor t = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    t = nn::relu(convs_[i]->forward(t));
    if (i % 2 == 1) taps.push_back(t);
  }
  return taps;
}

std::size_t PerceptualNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& conv : convs_)
    n += conv->weight.numel() + conv->bias.numel();
  return n;
}

Tensor stack_x(const std::vector<TrainingPair>& batch, bool requires_grad) {
  if (batch.empty()) throw DataError("empty batch");
  const int h = batch[0].x.height, w = batch[0].x.width;
  std::vector<float> vals;
  vals.reserve(batch.size() * static_cast<std::size_t>(h) * w);
  for (const auto& pair : batch) {
    if (pair.x.height != h || pair.x.width != w)
      throw DataError("batch rasters disagree in size");
    vals.insert(vals.end(), pair.x.data.begin(), pair.x.data.end());
  }
  return Tensor::from_values(Shape{static_cast<int>(batch.size()), 1, h, w},
                             std::move(vals), requires_grad);
}

Tensor stack_y(const std::vector<TrainingPair>& batch) {
  if (batch.empty()) throw DataError("empty batch");
  const int h = batch[0].y.height, w = batch[0].y.width;
  std::vector<float> vals;
  vals.reserve(batch.size() * static_cast<std::size_t>(h) * w);
  for (const auto& pair : batch) {
    if (pair.y.height != h || pair.y.width != w)
      throw DataError("batch rasters disagree in size");
    vals.insert(vals.end(), pair.y.data.begin(), pair.y.data.end());
  }
  return Tensor::from_values(Shape{static_cast<int>(batch.size()), 1, h, w},
                             std::move(vals), false);
}

Raster raster_from_tensor(const Tensor& t, int n, int c) {
  const Shape& s = t.shape();
  if (n < 0 || n >= s.n || c < 0 || c >= s.c)
    throw DataError("raster_from_tensor index out of range");
  Raster r(s.w, s.h);
  const auto& vals = t.values();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
  std::copy(vals.begin() + static_cast<std::ptrdiff_t>(base),
            vals.begin() + static_cast<std::ptrdiff_t>(base + plane),
            r.data.begin());
  return r;
}

Tensor tensor_from_raster(const Raster& r, bool requires_grad) {
  std::vector<float> vals(r.data.begin(), r.data.end());
  return Tensor::from_values(Shape{1, 1, r.height, r.width}, std::move(vals),
                             requires_grad);
}

}  // namespace tonematch::gan
