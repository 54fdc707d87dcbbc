// Minimal 8-bit PNG writer and reader, enough for gray/RGB LDR images.
// Writer emits filter-0 scanlines compressed with zlib; reader understands
// all five filters and verifies chunk CRCs.

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "tonematch/io.hpp"

namespace tonematch {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ostream& os, const char type[4], const std::uint8_t* data,
                 std::size_t n) {
  std::vector<std::uint8_t> head;
  put_u32(head, static_cast<std::uint32_t>(n));
  head.insert(head.end(), type, type + 4);
  os.write(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  if (n) os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
  if (n) crc = crc32(crc, data, static_cast<uInt>(n));
  std::vector<std::uint8_t> tail;
  put_u32(tail, static_cast<std::uint32_t>(crc));
  os.write(reinterpret_cast<char*>(tail.data()), 4);
}

constexpr std::uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png8(const LdrImage& img, const std::filesystem::path& path) {
  img.validate();
  const int bpp = img.channels;  // bytes per pixel at depth 8
  const std::size_t stride = static_cast<std::size_t>(img.width) * bpp;

  // Raw scanlines, each prefixed with filter byte 0. Quantization is
  // round-half-up: byte = floor(v*255 + 0.5).
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  std::size_t p = 0;
  for (int y = 0; y < img.height; ++y) {
    raw[p++] = 0;
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < bpp; ++c) {
        raw[p++] = static_cast<std::uint8_t>(
            std::floor(img.at(y, x, c) * 255.0f + 0.5f));
      }
    }
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_DEFAULT_COMPRESSION) != Z_OK) {
    throw DataError("write_png8: deflate failed");
  }
  compressed.resize(bound);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_png8: cannot open " + path.string());
  os.write(reinterpret_cast<const char*>(kPngSig), 8);
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);            // color type
  ihdr.push_back(0);                                    // compression
  ihdr.push_back(0);                                    // filter method
  ihdr.push_back(0);                                    // no interlace
  write_chunk(os, "IHDR", ihdr.data(), ihdr.size());
  write_chunk(os, "IDAT", compressed.data(), compressed.size());
  write_chunk(os, "IEND", nullptr, 0);
  if (!os) throw DataError("write_png8: write failed for " + path.string());
}

LdrImage read_png8(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_png8: cannot open " + path.string());
  std::uint8_t sig[8];
  is.read(reinterpret_cast<char*>(sig), 8);
  if (is.gcount() != 8 || std::memcmp(sig, kPngSig, 8) != 0) {
    throw DataError("read_png8: not a PNG file: " + path.string());
  }

  int width = 0, height = 0, channels = 0;
  bool saw_ihdr = false, saw_iend = false;
  std::vector<std::uint8_t> idat;
  while (!saw_iend) {
    std::uint8_t head[8];
    is.read(reinterpret_cast<char*>(head), 8);
    if (is.gcount() != 8) throw DataError("read_png8: truncated chunk in " + path.string());
    const std::uint32_t len = (head[0] << 24) | (head[1] << 16) | (head[2] << 8) | head[3];
    char type[5] = {static_cast<char>(head[4]), static_cast<char>(head[5]),
                    static_cast<char>(head[6]), static_cast<char>(head[7]), 0};
    std::vector<std::uint8_t> data(len);
    if (len) {
      is.read(reinterpret_cast<char*>(data.data()), len);
      if (static_cast<std::uint32_t>(is.gcount()) != len) {
        throw DataError("read_png8: truncated chunk data in " + path.string());
      }
    }
    std::uint8_t crc_b[4];
    is.read(reinterpret_cast<char*>(crc_b), 4);
    if (is.gcount() != 4) throw DataError("read_png8: missing chunk CRC in " + path.string());
    const std::uint32_t crc_file =
        (crc_b[0] << 24) | (crc_b[1] << 16) | (crc_b[2] << 8) | crc_b[3];
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (len) crc = crc32(crc, data.data(), len);
    if (static_cast<std::uint32_t>(crc) != crc_file) {
      throw DataError("read_png8: CRC mismatch in chunk " + std::string(type));
    }

    if (std::strcmp(type, "IHDR") == 0) {
      if (len != 13) throw DataError("read_png8: bad IHDR length");
      width = (data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3];
      height = (data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7];
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8 || (color != 0 && color != 2) || interlace != 0) {
        throw DataError("read_png8: only 8-bit gray/RGB non-interlaced PNGs supported");
      }
      channels = color == 2 ? 3 : 1;
      saw_ihdr = true;
    } else if (std::strcmp(type, "IDAT") == 0) {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (std::strcmp(type, "IEND") == 0) {
      saw_iend = true;
    }
    // ancillary chunks are skipped
  }
  if (!saw_ihdr || width <= 0 || height <= 0) {
    throw DataError("read_png8: missing IHDR in " + path.string());
  }

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zret = uncompress(raw.data(), &raw_len, idat.data(),
                              static_cast<uLong>(idat.size()));
  if (zret != Z_OK || raw_len != raw.size()) {
    throw DataError("read_png8: inflate failed for " + path.string());
  }

  // Undo per-scanline filters in place.
  std::vector<std::uint8_t> prev(stride, 0);
  LdrImage img(width, height, channels);
  const int bpp = channels;
  for (int y = 0; y < height; ++y) {
    std::uint8_t* line = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    const std::uint8_t filter = line[0];
    std::uint8_t* cur = line + 1;
    switch (filter) {
      case 0:
        break;
      case 1:  // Sub
        for (std::size_t i = bpp; i < stride; ++i) cur[i] += cur[i - bpp];
        break;
      case 2:  // Up
        for (std::size_t i = 0; i < stride; ++i) cur[i] += prev[i];
        break;
      case 3:  // Average
        for (std::size_t i = 0; i < stride; ++i) {
          const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
          cur[i] += static_cast<std::uint8_t>((a + prev[i]) / 2);
        }
        break;
      case 4:  // Paeth
        for (std::size_t i = 0; i < stride; ++i) {
          const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
          const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
          cur[i] += static_cast<std::uint8_t>(paeth(a, prev[i], c));
        }
        break;
      default:
        throw DataError("read_png8: unknown filter type " + std::to_string(filter));
    }
    std::memcpy(prev.data(), cur, stride);
    for (std::size_t i = 0; i < stride; ++i) {
      img.data[static_cast<std::size_t>(y) * stride + i] = cur[i] * (1.0f / 255.0f);
    }
  }
  return img;
}

}  // namespace tonematch
