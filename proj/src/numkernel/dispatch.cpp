// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <string_view>

#include "rss/numkernel/kernels.hpp"

namespace rss::kernels {

const KernelTable& active() noexcept {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* env = std::getenv("RSS_KERNELS");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_table();
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace rss::kernels
