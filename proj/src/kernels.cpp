#include "clash/kernels.hpp"

namespace clash::kern {

namespace {
const Kernels* g_forced = nullptr;
}

const Kernels& active() {
  if (g_forced) return *g_forced;
  static const Kernels* best = [] {
    if (const Kernels* k = avx2()) return k;
    return &scalar();
  }();
  return *best;
}

void force(const Kernels* k) { g_forced = k; }

}  // namespace clash::kern
