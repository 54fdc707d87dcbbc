#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tonematch/common.hpp"
#include "tonematch/image.hpp"
#include "tonematch/io.hpp"
#include "tonematch/rng.hpp"

using namespace tonematch;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "tonematch_io_tests";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("rgbe decode anchors") {
  float r = -1, g = -1, b = -1;
  const std::uint8_t one[4] = {128, 128, 128, 129};  // 128/256 * 2^1 = 1.0
  decode_rgbe(one, r, g, b);
  CHECK(r == doctest::Approx(1.0));
  CHECK(g == doctest::Approx(1.0));
  CHECK(b == doctest::Approx(1.0));

  const std::uint8_t zero[4] = {0, 0, 0, 0};
  decode_rgbe(zero, r, g, b);
  CHECK(r == 0.0f);
  CHECK(g == 0.0f);
  CHECK(b == 0.0f);
}

TEST_CASE("rgbe encode/decode mantissa precision") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    // log-uniform over many orders of magnitude
    const float v = std::exp((rng.uniform() * 2.0f - 1.0f) * 10.0f);
    std::uint8_t bytes[4];
    encode_rgbe(v, v * 0.5f, v * 0.25f, bytes);
    float r, g, b;
    decode_rgbe(bytes, r, g, b);
    CHECK(std::fabs(r - v) <= v / 128.0f);
    CHECK(std::fabs(g - v * 0.5f) <= v / 128.0f);
    CHECK(std::fabs(b - v * 0.25f) <= v / 128.0f);
  }
}

TEST_CASE("rgbe canonical bytes survive decode-encode") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const float scale = std::exp((rng.uniform() * 2.0f - 1.0f) * 8.0f);
    std::uint8_t canon[4];
    encode_rgbe(rng.uniform() * scale, rng.uniform() * scale,
                rng.uniform() * scale, canon);
    float r, g, b;
    decode_rgbe(canon, r, g, b);
    std::uint8_t again[4];
    encode_rgbe(r, g, b, again);
    for (int k = 0; k < 4; ++k) CHECK(again[k] == canon[k]);
  }
}

TEST_CASE("radiance hdr round trip within mantissa tolerance") {
  Rng rng(21);
  HdrImage img(64, 64, 3);
  for (float& v : img.data) v = rng.uniform() * 100.0f;
  const fs::path path = temp_dir() / "roundtrip.hdr";
  write_hdr(img, path, ImageFileFormat::kRadianceHdr);
  const HdrImage back = read_hdr(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  REQUIRE(back.channels == 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    // shared exponent: error bounded by the pixel max / 2^7
    const std::size_t px = i / 3;
    const float mx = std::max({img.data[px * 3], img.data[px * 3 + 1],
                               img.data[px * 3 + 2]});
    CHECK(std::fabs(back.data[i] - img.data[i]) <= mx / 128.0f + 1e-9f);
  }
}

TEST_CASE("radiance hdr rejects single-channel images") {
  HdrImage img(4, 4, 1, 1.0f);
  CHECK_THROWS_AS(write_hdr(img, temp_dir() / "gray.hdr",
                            ImageFileFormat::kRadianceHdr),
                  DataError);
}

TEST_CASE("pfm round trip is bit-exact") {
  HdrImage one(1, 1, 3, 1.0f);
  const fs::path p1 = temp_dir() / "one.pfm";
  write_hdr(one, p1, ImageFileFormat::kPfm);
  const HdrImage b1 = read_hdr(p1);
  CHECK(b1.data == one.data);

  Rng rng(31);
  HdrImage img(17, 9, 3);
  for (float& v : img.data) v = rng.uniform() * 1e4f;
  const fs::path p2 = temp_dir() / "rand.pfm";
  write_hdr(img, p2, ImageFileFormat::kPfm);
  const HdrImage b2 = read_hdr(p2);
  CHECK(b2.width == 17);
  CHECK(b2.height == 9);
  CHECK(b2.data == img.data);

  HdrImage gray(5, 3, 1);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = float(i);
  const fs::path p3 = temp_dir() / "gray.pfm";
  write_hdr(gray, p3, ImageFileFormat::kPfm);
  const HdrImage b3 = read_hdr(p3);
  CHECK(b3.channels == 1);
  CHECK(b3.data == gray.data);
}

TEST_CASE("negative sample rejected before write") {
  HdrImage img(2, 2, 3, 1.0f);
  img.at(0, 1, 0) = -2.0f;
  const fs::path path = temp_dir() / "negative.pfm";
  fs::remove(path);
  CHECK_THROWS_AS(write_hdr(img, path, ImageFileFormat::kPfm), DataError);
  CHECK(!fs::exists(path));
}

TEST_CASE("hdr reader sanitizes non-finite samples") {
  // Hand-build a PFM with a NaN and a negative sample.
  const fs::path path = temp_dir() / "dirty.pfm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "Pf\n2 1\n-1.0\n";
    const float vals[2] = {std::nanf(""), -3.0f};
    out.write(reinterpret_cast<const char*>(vals), sizeof(vals));
  }
  int sanitized = 0;
  const HdrImage img = read_hdr(path, &sanitized);
  CHECK(sanitized == 2);
  CHECK(img.data[0] == 0.0f);
  CHECK(img.data[1] == 0.0f);
}

TEST_CASE("png quantization anchors") {
  LdrImage img(2, 1, 1);
  img.data = {1.0f, 0.5f};
  const fs::path path = temp_dir() / "anchors.png";
  write_png8(img, path);
  const LdrImage back = read_png8(path);
  // byte = floor(v*255 + 0.5): 1.0 -> 255, 0.5 -> 128 (round half up)
  CHECK(std::lround(back.data[0] * 255.0f) == 255);
  CHECK(std::lround(back.data[1] * 255.0f) == 128);
}

TEST_CASE("png bytes match round-half-up quantization") {
  Rng rng(41);
  for (int channels : {1, 3}) {
    LdrImage img(23, 11, channels);
    for (float& v : img.data) v = rng.uniform();
    const fs::path path = temp_dir() / ("quant" + std::to_string(channels) + ".png");
    write_png8(img, path);
    const LdrImage back = read_png8(path);
    REQUIRE(back.channels == channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const long expected = std::lround(std::floor(img.data[i] * 255.0f + 0.5f));
      CHECK(std::lround(back.data[i] * 255.0f) == expected);
    }
  }
}

TEST_CASE("read_ldr dispatches by extension") {
  Rng rng(51);
  LdrImage img(8, 6, 3);
  for (float& v : img.data) v = rng.uniform();
  const fs::path png = temp_dir() / "disp.png";
  write_png8(img, png);
  CHECK(read_ldr(png).channels == 3);

  CHECK_THROWS_AS(read_ldr(temp_dir() / "missing.png"), DataError);
  CHECK_THROWS_AS(read_hdr(temp_dir() / "missing.hdr"), DataError);
}

TEST_CASE("png reader rejects corrupted crc") {
  Rng rng(61);
  LdrImage img(6, 6, 1);
  for (float& v : img.data) v = rng.uniform();
  const fs::path path = temp_dir() / "crc.png";
  write_png8(img, path);
  // Flip one byte inside the IDAT payload.
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(0, std::ios::end);
  const long size = static_cast<long>(f.tellg());
  f.seekp(size / 2);
  char c;
  f.seekg(size / 2);
  f.read(&c, 1);
  f.seekp(size / 2);
  c = static_cast<char>(c ^ 0x5a);
  f.write(&c, 1);
  f.close();
  CHECK_THROWS_AS(read_png8(path), DataError);
}
