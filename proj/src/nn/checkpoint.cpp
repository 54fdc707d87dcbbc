#include "tonematch/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "tonematch/common.hpp"

namespace tonematch::nn {

namespace {

constexpr char kMagic[5] = {'D', 'T', 'M', 'O', '1'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError(std::string("checkpoint truncated reading ") + what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<NamedTensorData>& tensors) {
  std::set<std::string> seen;
  for (const auto& t : tensors) {
    if (t.name.empty()) throw DataError("checkpoint: empty tensor name");
    if (!seen.insert(t.name).second)
      throw DataError("checkpoint: duplicate tensor name '" + t.name + "'");
    if (t.dims.empty() || t.dims.size() > kMaxRank)
      throw DataError("checkpoint: bad rank for '" + t.name + "'");
    std::uint64_t n = 1;
    for (std::uint32_t d : t.dims) n *= d;
    if (n != t.values.size())
      throw DataError("checkpoint: '" + t.name + "' has " +
                      std::to_string(t.values.size()) + " values for dims of " +
                      std::to_string(n));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) put_u32(out, d);
    for (float v : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<NamedTensorData> read_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
    throw DataError("'" + path.string() + "' is not a checkpoint (bad magic)");
  const std::uint32_t count = get_u32(in, "tensor count");
  std::vector<NamedTensorData> tensors;
  tensors.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensorData t;
    const std::uint32_t name_len = get_u32(in, "name length");
    if (name_len == 0 || name_len > 4096)
      throw DataError("checkpoint: implausible name length");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len))
      throw DataError("checkpoint truncated reading a name");
    if (!seen.insert(t.name).second)
      throw DataError("checkpoint: duplicate tensor name '" + t.name + "'");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank == 0 || rank > kMaxRank)
      throw DataError("checkpoint: bad rank for '" + t.name + "'");
    std::uint64_t n = 1;
    t.dims.resize(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims[d] = get_u32(in, "dims");
      n *= t.dims[d];
      if (n > (1ull << 32))
        throw DataError("checkpoint: implausible tensor size for '" + t.name +
                        "'");
    }
    t.values.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      const std::uint32_t bits = get_u32(in, "values");
      std::memcpy(&t.values[k], &bits, 4);
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

const NamedTensorData& find_tensor(const std::vector<NamedTensorData>& tensors,
                                   const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw DataError("checkpoint: missing tensor '" + name + "'");
}

bool has_tensor(const std::vector<NamedTensorData>& tensors,
                const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

}  // namespace tonematch::nn
