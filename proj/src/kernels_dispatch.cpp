#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ycvt/kernels.hpp"

namespace ycvt::kernels {

namespace {

const Kernels* select_from_env() {
  const char* env = std::getenv("YLDCVT_KERNELS");
  if (env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return &scalar_backend();
    if (want == "avx2") {
      const Kernels* k = avx2_backend();
      if (k == nullptr)
        throw std::runtime_error("YLDCVT_KERNELS=avx2 requested but this CPU lacks AVX2/FMA");
      return k;
    }
    throw std::runtime_error("YLDCVT_KERNELS must be 'scalar' or 'avx2', got '" + want + "'");
  }
  const Kernels* k = avx2_backend();
  return k != nullptr ? k : &scalar_backend();
}

std::atomic<const Kernels*> g_forced{nullptr};

}  // namespace

const Kernels& active() {
  const Kernels* forced = g_forced.load(std::memory_order_acquire);
  if (forced != nullptr) return *forced;
  static const Kernels* chosen = select_from_env();
  return *chosen;
}

void force_backend(const Kernels* k) {
  g_forced.store(k, std::memory_order_release);
}

}  // namespace ycvt::kernels
