// Runtime backend selection.

#include "gfl/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gfl::kernels {

const Ops* avx2_ops();  // defined in kernels_avx2.cpp (null off x86)
const Ops* neon_ops();  // defined in kernels_neon.cpp (null off aarch64)

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& scalar_ops();

const Ops* ops_for(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return &scalar_ops();
    case Backend::avx2:
      return cpu_has_avx2() ? avx2_ops() : nullptr;
    case Backend::neon:
      return neon_ops();
  }
  return nullptr;
}

namespace {

const Ops* select() {
#if defined(__GLIBC__)
  // Tensor buffers churn at sizes glibc would otherwise serve through
  // mmap/munmap; keeping them on the heap avoids page-fault storms in the
  // op-per-op training loop.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  if (const char* env = std::getenv("GFL_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(env, "avx2") == 0)
      if (const Ops* t = ops_for(Backend::avx2)) return t;
    if (std::strcmp(env, "neon") == 0)
      if (const Ops* t = ops_for(Backend::neon)) return t;
  }
  if (const Ops* t = ops_for(Backend::avx2)) return t;
  if (const Ops* t = ops_for(Backend::neon)) return t;
  return &scalar_ops();
}

std::atomic<int> g_max_threads{0};

}  // namespace

const Ops& active() {
  static const Ops* selected = select();
  return *selected;
}

int max_threads() {
  int n = g_max_threads.load(std::memory_order_relaxed);
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

}  // namespace gfl::kernels
