// PFM reader/writer. Scale sign encodes endianness (negative = little);
// the magnitude is honored as a linear factor on read and written as 1.
// Scanlines are stored bottom-to-top per the usual convention.

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tonematch/io.hpp"

namespace tonematch {

namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM byte handling below assumes a little-endian host");

// One whitespace-delimited token, skipping leading whitespace.
std::string pfm_token(std::istream& is) {
  std::string t;
  is >> t;
  if (t.empty()) throw DataError("read_hdr: truncated PFM header");
  return t;
}

}  // namespace

void write_pfm(const HdrImage& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_hdr: cannot open " + path.string());
  os << (img.channels == 3 ? "PF" : "Pf") << "\n";
  os << img.width << " " << img.height << "\n";
  os << "-1.0\n";
  const std::size_t row_floats = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = img.height - 1; y >= 0; --y) {
    os.write(reinterpret_cast<const char*>(img.data.data() + y * row_floats),
             static_cast<std::streamsize>(row_floats * sizeof(float)));
  }
  if (!os) throw DataError("write_hdr: write failed for " + path.string());
}

HdrImage read_pfm(std::istream& is, const std::string& name) {
  const std::string magic = pfm_token(is);
  int channels;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw DataError("read_hdr: bad PFM magic in " + name);
  }
  int w, h;
  double scale;
  try {
    w = std::stoi(pfm_token(is));
    h = std::stoi(pfm_token(is));
    scale = std::stod(pfm_token(is));
  } catch (const std::exception&) {
    throw DataError("read_hdr: malformed PFM header in " + name);
  }
  if (w <= 0 || h <= 0) throw DataError("read_hdr: bad PFM dimensions in " + name);
  if (scale == 0.0) throw DataError("read_hdr: zero PFM scale in " + name);
  is.get();  // single whitespace byte terminating the header

  const bool big_endian = scale > 0.0;
  const float factor = static_cast<float>(std::fabs(scale));
  HdrImage img(w, h, channels);
  const std::size_t row_floats = static_cast<std::size_t>(w) * channels;
  std::vector<float> row(row_floats);
  for (int y = h - 1; y >= 0; --y) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row_floats * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != row_floats * sizeof(float)) {
      throw DataError("read_hdr: truncated PFM data in " + name);
    }
    if (big_endian) {
      for (float& f : row) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&f, &u, 4);
      }
    }
    if (factor != 1.0f) {
      for (float& f : row) f *= factor;
    }
    std::memcpy(img.data.data() + static_cast<std::size_t>(y) * row_floats, row.data(),
                row_floats * sizeof(float));
  }
  return img;
}

}  // namespace tonematch
