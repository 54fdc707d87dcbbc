#pragma once

// Internal: the meta block stored alongside tensors in a training checkpoint.
// Every field rides as a small f32 tensor so the container format stays
// single-typed; integers stay exact (all < 2^24), the seed is split into
// four 16-bit limbs.

#include <cstdint>
#include <string>
#include <vector>

#include "tonematch/common.hpp"
#include "tonematch/gan.hpp"
#include "tonematch/nn/checkpoint.hpp"

namespace tonematch::gan::detail {

struct CkptMeta {
  int format = 1;
  int phase = 2;  // 1 = coarse pretraining, 2 = joint / single-scale
  int epoch = 0;  // completed epochs within the phase
  GanScale scale = GanScale::kSingle;
  int base_width = 8;
  int n_resblocks = 9;
  int n_down = 4;
  nn::NormKind norm = nn::NormKind::kInstance;
  int d_base_width = 8;
  int d_layers = 4;
  int perc_base_width = 8;
  NormalizationVariant input_norm = NormalizationVariant::kLog;
  float input_norm_eps = 1e-6f;
  std::uint64_t seed = 0;
};

inline nn::NamedTensorData meta_scalar(const std::string& name, double v) {
  nn::NamedTensorData rec;
  rec.name = name;
  rec.dims = {1};
  rec.values = {static_cast<float>(v)};
  return rec;
}

inline void append_meta(std::vector<nn::NamedTensorData>& out, const CkptMeta& m) {
  out.push_back(meta_scalar("meta.format", m.format));
  out.push_back(meta_scalar("meta.phase", m.phase));
  out.push_back(meta_scalar("meta.epoch", m.epoch));
  out.push_back(meta_scalar("meta.scale", m.scale == GanScale::kMulti ? 1 : 0));
  out.push_back(meta_scalar("meta.base_width", m.base_width));
  out.push_back(meta_scalar("meta.n_resblocks", m.n_resblocks));
  out.push_back(meta_scalar("meta.n_down", m.n_down));
  out.push_back(meta_scalar("meta.norm", m.norm == nn::NormKind::kBatch ? 1 : 0));
  out.push_back(meta_scalar("meta.d_base_width", m.d_base_width));
  out.push_back(meta_scalar("meta.d_layers", m.d_layers));
  out.push_back(meta_scalar("meta.perc_base_width", m.perc_base_width));
  out.push_back(meta_scalar(
      "meta.input_norm", m.input_norm == NormalizationVariant::kLog ? 1 : 0));
  out.push_back(meta_scalar("meta.input_norm_eps", m.input_norm_eps));
  nn::NamedTensorData seed;
  seed.name = "meta.seed";
  seed.dims = {4};
  for (int i = 0; i < 4; ++i)
    seed.values.push_back(
        static_cast<float>((m.seed >> (16 * i)) & 0xffffull));
  out.push_back(std::move(seed));
}

inline int meta_int(const std::vector<nn::NamedTensorData>& tensors,
                    const std::string& name) {
  const auto& rec = nn::find_tensor(tensors, name);
  if (rec.values.size() != 1)
    throw DataError("checkpoint meta field '" + name + "' is malformed");
  return static_cast<int>(rec.values[0]);
}

inline CkptMeta read_meta(const std::vector<nn::NamedTensorData>& tensors) {
  CkptMeta m;
  m.format = meta_int(tensors, "meta.format");
  if (m.format != 1)
    throw DataError("unsupported checkpoint meta format " +
                    std::to_string(m.format));
  m.phase = meta_int(tensors, "meta.phase");
  m.epoch = meta_int(tensors, "meta.epoch");
  m.scale = meta_int(tensors, "meta.scale") ? GanScale::kMulti : GanScale::kSingle;
  m.base_width = meta_int(tensors, "meta.base_width");
  m.n_resblocks = meta_int(tensors, "meta.n_resblocks");
  m.n_down = meta_int(tensors, "meta.n_down");
  m.norm = meta_int(tensors, "meta.norm") ? nn::NormKind::kBatch
                                          : nn::NormKind::kInstance;
  m.d_base_width = meta_int(tensors, "meta.d_base_width");
  m.d_layers = meta_int(tensors, "meta.d_layers");
  m.perc_base_width = meta_int(tensors, "meta.perc_base_width");
  m.input_norm = meta_int(tensors, "meta.input_norm")
                     ? NormalizationVariant::kLog
                     : NormalizationVariant::kLinear;
  m.input_norm_eps = nn::find_tensor(tensors, "meta.input_norm_eps").values[0];
  const auto& seed = nn::find_tensor(tensors, "meta.seed");
  if (seed.values.size() != 4)
    throw DataError("checkpoint meta field 'meta.seed' is malformed");
  m.seed = 0;
  for (int i = 0; i < 4; ++i)
    m.seed |= static_cast<std::uint64_t>(
                  static_cast<std::uint32_t>(seed.values[i]) & 0xffffu)
              << (16 * i);
  return m;
}

inline GeneratorConfig generator_config_of(const CkptMeta& m) {
  GeneratorConfig cfg;
  cfg.scale = m.scale;
  cfg.base_width = m.base_width;
  cfg.n_resblocks = m.n_resblocks;
  cfg.n_down = m.n_down;
  cfg.norm = m.norm;
  return cfg;
}

}  // namespace tonematch::gan::detail
