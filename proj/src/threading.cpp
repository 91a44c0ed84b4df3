#include "pwg/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pwg {

namespace {
std::atomic<int> g_override{0};

int env_threads() {
  const char* v = std::getenv("PWG_THREADS");
  if (v == nullptr) return 0;
  int n = std::atoi(v);
  return n > 0 ? n : 0;
}

// Training allocates and frees multi-megabyte activation buffers every
// step. With default glibc thresholds those round-trip through mmap/munmap
// and the pass spends more time page-faulting than computing, so keep large
// blocks on the free list. Every kernel passes through kernel_threads(),
// making it a convenient one-time hook.
void tune_allocator_once() {
#if defined(__GLIBC__)
  static std::once_flag flag;
  std::call_once(flag, [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}
}  // namespace

int kernel_threads() {
  tune_allocator_once();
  int n = g_override.load(std::memory_order_relaxed);
  if (n > 0) return n;
  n = env_threads();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_kernel_threads(int n) { g_override.store(n, std::memory_order_relaxed); }

}  // namespace pwg
