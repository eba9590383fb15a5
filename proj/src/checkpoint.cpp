#include "her2flex/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace her2flex::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr std::uint32_t kMagic = 0x48465843;  // "HFXC"
constexpr std::uint32_t kTrailer = 0x21444e45;  // "END!"
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  require(bool(is), Errc::corrupt_checkpoint, "unexpected end of file");
  return v;
}

std::string get_str(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  require(n <= (1u << 24), Errc::corrupt_checkpoint, "implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  require(bool(is), Errc::corrupt_checkpoint, "unexpected end of file");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(bool(os), Errc::io_error, "cannot create " + path);
  put_u32(os, kMagic);
  put_u32(os, kVersion);
  put_str(os, ckpt.stage);
  put_str(os, ckpt.config_text);
  put_u32(os, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, m] : ckpt.arrays) {
    put_str(os, name);
    put_u32(os, static_cast<std::uint32_t>(m.rows()));
    put_u32(os, static_cast<std::uint32_t>(m.cols()));
    os.put(static_cast<char>(kDtypeF32));
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(float) * m.size()));
  }
  put_u32(os, kTrailer);
  require(bool(os), Errc::io_error, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), Errc::missing_checkpoint, "cannot open " + path);
  require(get_u32(is) == kMagic, Errc::corrupt_checkpoint, "bad magic in " + path);
  require(get_u32(is) == kVersion, Errc::corrupt_checkpoint, "unsupported version in " + path);

  Checkpoint ckpt;
  ckpt.stage = get_str(is);
  ckpt.config_text = get_str(is);
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_str(is);
    const std::uint32_t rows = get_u32(is);
    const std::uint32_t cols = get_u32(is);
    const int dtype = is.get();
    require(dtype == kDtypeF32, Errc::corrupt_checkpoint, "unknown dtype for '" + name + "'");
    require(static_cast<std::uint64_t>(rows) * cols <= (1ull << 28), Errc::corrupt_checkpoint,
            "implausible array size for '" + name + "'");
    MatrixF m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * m.size()));
    require(bool(is), Errc::corrupt_checkpoint, "truncated array data for '" + name + "'");
    ckpt.arrays.emplace(name, std::move(m));
  }
  require(get_u32(is) == kTrailer, Errc::corrupt_checkpoint, "missing trailer in " + path);
  return ckpt;
}

void add_store(Checkpoint& ckpt, const std::string& prefix, const ParamStore<float>& store) {
  for (const auto& [name, e] : store.entries()) ckpt.arrays[prefix + "/" + name] = e.value;
}

void load_store(const Checkpoint& ckpt, const std::string& prefix, ParamStore<float>& store) {
  for (auto& [name, e] : store.entries()) {
    const auto it = ckpt.arrays.find(prefix + "/" + name);
    require(it != ckpt.arrays.end(), Errc::corrupt_checkpoint,
            "checkpoint lacks array '" + prefix + "/" + name + "'");
    require(it->second.rows() == e.value.rows() && it->second.cols() == e.value.cols(),
            Errc::corrupt_checkpoint, "shape header mismatch for '" + prefix + "/" + name + "'");
    e.value = it->second;
  }
}

}  // namespace her2flex::nn
