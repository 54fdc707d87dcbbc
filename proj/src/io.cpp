#include <cmath>
#include <fstream>
#include <iostream>

#include "tonematch/io.hpp"

namespace tonematch {

// Implemented in io_rgbe.cpp / io_pfm.cpp.
HdrImage read_radiance_hdr(std::istream& is, const std::string& name);
void write_radiance_hdr(const HdrImage& img, const std::filesystem::path& path);
HdrImage read_pfm(std::istream& is, const std::string& name);
void write_pfm(const HdrImage& img, const std::filesystem::path& path);

namespace {

int sanitize(HdrImage& img) {
  int count = 0;
  for (float& v : img.data) {
    if (!std::isfinite(v) || v < 0.0f) {
      v = 0.0f;
      ++count;
    }
  }
  return count;
}

}  // namespace

HdrImage read_hdr(const std::filesystem::path& path, int* sanitized) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_hdr: cannot open " + path.string());
  char magic[2] = {0, 0};
  is.read(magic, 2);
  if (is.gcount() != 2) throw DataError("read_hdr: file too short: " + path.string());
  is.seekg(0);

  HdrImage img;
  if (magic[0] == '#' && magic[1] == '?') {
    img = read_radiance_hdr(is, path.string());
  } else if (magic[0] == 'P' && (magic[1] == 'F' || magic[1] == 'f')) {
    img = read_pfm(is, path.string());
  } else {
    throw DataError("read_hdr: unrecognized format (expected Radiance RGBE or PFM): " +
                    path.string());
  }

  const int fixed = sanitize(img);
  if (sanitized) *sanitized = fixed;
  if (fixed > 0) {
    std::cerr << "read_hdr: clamped " << fixed << " non-finite/negative sample"
              << (fixed == 1 ? "" : "s") << " to 0 in " << path.string() << "\n";
  }
  return img;
}

void write_hdr(const HdrImage& img, const std::filesystem::path& path,
               ImageFileFormat format) {
  switch (format) {
    case ImageFileFormat::kRadianceHdr:
      write_radiance_hdr(img, path);
      return;
    case ImageFileFormat::kPfm:
      write_pfm(img, path);
      return;
    case ImageFileFormat::kPng8:
      throw DataError("write_hdr: PNG is display-referred; use write_png8");
  }
  throw DataError("write_hdr: unknown format");
}

LdrImage read_ldr(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png8(path);
  if (ext == ".pfm" || ext == ".PFM") {
    HdrImage raw = read_hdr(path);
    LdrImage out(raw.width, raw.height, raw.channels);
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
      const float v = raw.data[i];
      if (!(v >= 0.0f && v <= 1.0f + 1e-4f)) {  // tolerate float dust only
        throw DataError("read_ldr: PFM sample outside display range at index " +
                        std::to_string(i) + " in " + path.string());
      }
      out.data[i] = std::min(v, 1.0f);
    }
    return out;
  }
  throw DataError("read_ldr: unsupported extension '" + ext + "' (png or pfm)");
}

}  // namespace tonematch
