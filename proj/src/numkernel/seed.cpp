// SPDX-License-Identifier: Apache-2.0
#include <cstring>

#include "rss/util/seed.hpp"

namespace rss {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h) noexcept {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t h) noexcept {
  for (double v : values) {
    unsigned char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof buf);
    h = fnv1a64(std::span<const unsigned char>(buf, sizeof buf), h);
  }
  return h;
}

}  // namespace rss
