// SPDX-License-Identifier: Apache-2.0
#include "rss/lm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rss {
namespace {

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::vector<std::uint64_t> shape_of(const LmParameters& p, const std::string& name) {
  const auto& c = p.config;
  if (name == "embedding") return {c.vocab, c.units};
  if (name == "out_bias") return {c.vocab};
  const auto dot = name.find('.');
  const std::string field = name.substr(dot + 1);
  if (field == "wx" || field == "wh") return {4 * c.units, c.units};
  return {4 * c.units};
}

}  // namespace

void save_checkpoint(const LmParameters& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  const auto& c = params.config;
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.layers));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.units));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.vocab));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(c.max_len));
  put<double>(os, c.dropout);
  const auto arrays = params.arrays();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, data] : arrays) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto shape = shape_of(params, name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(os, d);
    for (double v : data) put<double>(os, v);
  }
  if (!os) throw std::runtime_error("error writing checkpoint: " + path.string());
}

LmParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("not a checkpoint (bad magic): " + path.string());
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  LmConfig c;
  c.layers = get<std::uint32_t>(is);
  c.units = get<std::uint32_t>(is);
  c.vocab = get<std::uint32_t>(is);
  c.max_len = get<std::uint32_t>(is);
  c.dropout = get<double>(is);
  LmParameters p = LmParameters::zeros(c);
  auto arrays = p.arrays();
  const auto n = get<std::uint32_t>(is);
  if (n != arrays.size()) throw std::runtime_error("checkpoint: expected " + std::to_string(arrays.size()) + " arrays");
  for (auto& [name, data] : arrays) {
    const auto len = get<std::uint32_t>(is);
    std::string stored(len, '\0');
    if (!is.read(stored.data(), len) || stored != name) {
      throw std::runtime_error("checkpoint: expected array '" + name + "', found '" + stored + "'");
    }
    const auto ndim = get<std::uint32_t>(is);
    std::vector<std::uint64_t> shape(ndim);
    for (auto& d : shape) d = get<std::uint64_t>(is);
    if (shape != shape_of(p, name)) throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    for (double& v : data) v = get<double>(is);
  }
  return p;
}

}  // namespace rss
