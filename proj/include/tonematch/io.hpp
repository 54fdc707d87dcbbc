#pragma once

#include <cstdint>
#include <filesystem>

#include "tonematch/image.hpp"

namespace tonematch {

enum class ImageFileFormat { kRadianceHdr, kPfm, kPng8 };

// Scene-referred readers sanitize rather than reject: non-finite or negative
// decoded samples are clamped to 0 and counted (stray NaNs are a fact of life
// in HDR datasets). The count lands in *sanitized when provided, and a one-line
// warning goes to stderr when it is non-zero.
HdrImage read_hdr(const std::filesystem::path& path, int* sanitized = nullptr);

// Format chosen explicitly. Radiance RGBE is inherently three-channel, so
// single-channel images are rejected for kRadianceHdr (PFM covers them).
void write_hdr(const HdrImage& img, const std::filesystem::path& path,
               ImageFileFormat format);

// 8-bit PNG (gray or RGB), round-half-up quantization: byte = floor(v*255 + 0.5).
void write_png8(const LdrImage& img, const std::filesystem::path& path);

// Minimal PNG reader: 8-bit gray/RGB, all five scanline filters, CRC-checked.
LdrImage read_png8(const std::filesystem::path& path);

// Display-referred load: .png via read_png8, .pfm clamped-validated to [0,1].
LdrImage read_ldr(const std::filesystem::path& path);

// Shared-exponent codec primitives (exposed for tests).
// encode: mantissas chosen so the largest lands in [128, 255]; components
// below 1e-32 encode as all-zero. decode: c = mantissa/256 * 2^(e-128),
// exponent byte 0 decodes to black.
void encode_rgbe(float r, float g, float b, std::uint8_t out[4]);
void decode_rgbe(const std::uint8_t rgbe[4], float& r, float& g, float& b);

}  // namespace tonematch
