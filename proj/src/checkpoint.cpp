#include "genie/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace genie {
namespace {

constexpr char kMagic[4] = {'G', 'N', 'P', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxNameLen = 4096;

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

void put_f64(std::ostream& out, double v) {
  static_assert(sizeof(double) == 8);
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  put_u64(out, bits);
}

bool get_bytes(std::istream& in, char* buf, std::size_t n) {
  in.read(buf, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t get_u32(std::istream& in, const std::string& path, const char* what) {
  char buf[4];
  if (!get_bytes(in, buf, 4)) throw std::invalid_argument(path + ": truncated " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path, const char* what) {
  char buf[8];
  if (!get_bytes(in, buf, 8)) throw std::invalid_argument(path + ": truncated " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  for (const auto& [name, tensor] : params) {
    if (name.empty() || name.size() > kMaxNameLen)
      throw std::invalid_argument("checkpoint: bad parameter name length");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<std::uint64_t>(tensor.rows));
    put_u64(out, static_cast<std::uint64_t>(tensor.cols));
    for (double x : tensor.data) put_f64(out, x);
  }
  if (!out) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  char magic[4];
  if (!get_bytes(in, magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::invalid_argument(path + ": not a parameter file (bad magic)");
  const std::uint32_t version = get_u32(in, path, "version");
  if (version != kVersion)
    throw std::invalid_argument(path + ": unsupported format version " + std::to_string(version));

  std::vector<std::pair<std::string, Tensor>> params;
  while (true) {
    char first;
    if (!in.get(first)) break;  // clean end of file
    in.putback(first);
    const std::uint32_t name_len = get_u32(in, path, "record header");
    if (name_len == 0 || name_len > kMaxNameLen)
      throw std::invalid_argument(path + ": corrupt record (name length " + std::to_string(name_len) + ")");
    std::string name(name_len, '\0');
    if (!get_bytes(in, name.data(), name_len)) throw std::invalid_argument(path + ": truncated name");
    const std::uint64_t rows = get_u64(in, path, "shape");
    const std::uint64_t cols = get_u64(in, path, "shape");
    if (rows > (1u << 30) || cols > (1u << 30) || rows * cols > (1u << 30))
      throw std::invalid_argument(path + ": implausible tensor shape in record '" + name + "'");
    Tensor t(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& x : t.data) {
      const std::uint64_t bits = get_u64(in, path, "payload");
      x = std::bit_cast<double>(bits);
    }
    params.emplace_back(std::move(name), std::move(t));
  }
  return params;
}

}  // namespace genie
