// Radiance RGBE (.hdr) codec. Pixel encoding follows the classic shared
// exponent scheme; scanlines are written with the "new" per-component RLE
// for widths in [8, 32767] and flat otherwise. The reader handles new RLE,
// the old (1,1,1,count) repeat style, and flat data.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tonematch/io.hpp"

namespace tonematch {

void encode_rgbe(float r, float g, float b, std::uint8_t out[4]) {
  float v = r;
  if (g > v) v = g;
  if (b > v) v = b;
  if (v < 1e-32f) {
    out[0] = out[1] = out[2] = out[3] = 0;
    return;
  }
  int e;
  const float scale = std::frexp(v, &e) * 256.0f / v;
  out[0] = static_cast<std::uint8_t>(r * scale);
  out[1] = static_cast<std::uint8_t>(g * scale);
  out[2] = static_cast<std::uint8_t>(b * scale);
  out[3] = static_cast<std::uint8_t>(e + 128);
}

void decode_rgbe(const std::uint8_t rgbe[4], float& r, float& g, float& b) {
  if (rgbe[3] == 0) {
    r = g = b = 0.0f;
    return;
  }
  // mantissa/256 * 2^(e-128), folded into one ldexp
  const float f = std::ldexp(1.0f, static_cast<int>(rgbe[3]) - (128 + 8));
  r = rgbe[0] * f;
  g = rgbe[1] * f;
  b = rgbe[2] * f;
}

namespace rgbe_detail {

constexpr int kMinRunLength = 4;

void write_rle_component(std::ostream& os, const std::uint8_t* data, int n) {
  int cur = 0;
  std::uint8_t buf[2];
  while (cur < n) {
    int beg_run = cur;
    int run_count = 0, old_run_count = 0;
    // advance to the next run of at least kMinRunLength
    while (run_count < kMinRunLength && beg_run < n) {
      beg_run += run_count;
      old_run_count = run_count;
      run_count = 1;
      while (beg_run + run_count < n && run_count < 127 &&
             data[beg_run] == data[beg_run + run_count]) {
        ++run_count;
      }
    }
    // short run just before a long one: cheaper to emit as a run too
    if (old_run_count > 1 && old_run_count == beg_run - cur) {
      buf[0] = static_cast<std::uint8_t>(128 + old_run_count);
      buf[1] = data[cur];
      os.write(reinterpret_cast<char*>(buf), 2);
      cur = beg_run;
    }
    // literals up to the run
    while (cur < beg_run) {
      int count = beg_run - cur;
      if (count > 128) count = 128;
      buf[0] = static_cast<std::uint8_t>(count);
      os.write(reinterpret_cast<char*>(buf), 1);
      os.write(reinterpret_cast<const char*>(data + cur), count);
      cur += count;
    }
    if (run_count >= kMinRunLength) {
      buf[0] = static_cast<std::uint8_t>(128 + run_count);
      buf[1] = data[beg_run];
      os.write(reinterpret_cast<char*>(buf), 2);
      cur = beg_run + run_count;
    }
  }
}

}  // namespace rgbe_detail

void write_radiance_hdr(const HdrImage& img, const std::filesystem::path& path) {
  if (img.channels != 3) {
    throw DataError("write_hdr: Radiance RGBE is three-channel; "
                    "use PFM for single-channel data");
  }
  img.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_hdr: cannot open " + path.string());
  os << "#?RADIANCE\n";
  os << "FORMAT=32-bit_rle_rgbe\n";
  os << "\n";
  os << "-Y " << img.height << " +X " << img.width << "\n";

  const int w = img.width;
  const bool use_rle = w >= 8 && w <= 32767;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 4);
  std::vector<std::uint8_t> plane(w);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < w; ++x) {
      encode_rgbe(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), &row[4 * x]);
    }
    if (!use_rle) {
      os.write(reinterpret_cast<char*>(row.data()), row.size());
      continue;
    }
    const std::uint8_t header[4] = {
        2, 2, static_cast<std::uint8_t>(w >> 8), static_cast<std::uint8_t>(w & 0xff)};
    os.write(reinterpret_cast<const char*>(header), 4);
    for (int c = 0; c < 4; ++c) {
      for (int x = 0; x < w; ++x) plane[x] = row[4 * x + c];
      rgbe_detail::write_rle_component(os, plane.data(), w);
    }
  }
  if (!os) throw DataError("write_hdr: write failed for " + path.string());
}

namespace {

void need(std::istream& is, std::uint8_t* dst, std::size_t n, const char* what) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw DataError(std::string("read_hdr: truncated RGBE data (") + what + ")");
  }
}

// Old-style scanline: pixels arrive raw except that (1,1,1,count) repeats the
// previous pixel, with count shifted 8 bits further per consecutive marker.
void read_old_rle(std::istream& is, std::uint8_t* row, int width,
                  const std::uint8_t first[4], bool have_first) {
  int x = 0;
  int rshift = 0;
  std::uint8_t px[4];
  bool pending = have_first;
  if (pending) std::memcpy(px, first, 4);
  while (x < width) {
    if (!pending) need(is, px, 4, "old-style scanline");
    pending = false;
    if (px[0] == 1 && px[1] == 1 && px[2] == 1) {
      if (x == 0) throw DataError("read_hdr: old-style run with no previous pixel");
      long count = static_cast<long>(px[3]) << rshift;
      if (count > width - x) throw DataError("read_hdr: old-style run overruns scanline");
      const std::uint8_t* prev = row + 4 * (x - 1);
      for (long i = 0; i < count; ++i) {
        std::memcpy(row + 4 * x, prev, 4);
        ++x;
      }
      rshift += 8;
    } else {
      std::memcpy(row + 4 * x, px, 4);
      ++x;
      rshift = 0;
    }
  }
}

void read_new_rle(std::istream& is, std::uint8_t* row, int width) {
  std::vector<std::uint8_t> plane(width);
  for (int c = 0; c < 4; ++c) {
    int x = 0;
    while (x < width) {
      std::uint8_t code;
      need(is, &code, 1, "RLE code");
      if (code > 128) {
        int count = code - 128;
        if (count > width - x) throw DataError("read_hdr: RLE run overruns scanline");
        std::uint8_t value;
        need(is, &value, 1, "RLE run value");
        while (count-- > 0) plane[x++] = value;
      } else {
        int count = code;
        if (count == 0) throw DataError("read_hdr: zero-length RLE literal");
        if (count > width - x) throw DataError("read_hdr: RLE literal overruns scanline");
        need(is, &plane[x], static_cast<std::size_t>(count), "RLE literals");
        x += count;
      }
    }
    for (int i = 0; i < width; ++i) row[4 * i + c] = plane[i];
  }
}

}  // namespace

HdrImage read_radiance_hdr(std::istream& is, const std::string& name) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("read_hdr: empty file " + name);
  if (line.rfind("#?", 0) != 0) {
    throw DataError("read_hdr: missing #? signature in " + name);
  }
  bool format_ok = true;  // FORMAT line is optional; if present it must match
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") break;
    if (line.rfind("FORMAT=", 0) == 0) {
      std::string fmt = line.substr(7);
      if (!fmt.empty() && fmt.back() == '\r') fmt.pop_back();
      format_ok = fmt == "32-bit_rle_rgbe";
    }
  }
  if (!format_ok) throw DataError("read_hdr: unsupported FORMAT in " + name);
  if (!std::getline(is, line)) throw DataError("read_hdr: missing resolution in " + name);
  int w = 0, h = 0;
  if (std::sscanf(line.c_str(), "-Y %d +X %d", &h, &w) != 2 || w <= 0 || h <= 0) {
    throw DataError("read_hdr: unsupported resolution string '" + line + "' in " + name);
  }

  HdrImage img(w, h, 3);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 4);
  for (int y = 0; y < h; ++y) {
    if (w < 8 || w > 32767) {
      read_old_rle(is, row.data(), w, nullptr, false);
    } else {
      std::uint8_t head[4];
      need(is, head, 4, "scanline header");
      if (head[0] == 2 && head[1] == 2 && !(head[2] & 0x80)) {
        const int sw = (head[2] << 8) | head[3];
        if (sw != w) throw DataError("read_hdr: scanline width mismatch in " + name);
        read_new_rle(is, row.data(), w);
      } else {
        read_old_rle(is, row.data(), w, head, true);
      }
    }
    for (int x = 0; x < w; ++x) {
      decode_rgbe(&row[4 * x], img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
    }
  }
  return img;
}

}  // namespace tonematch
