#include "lifted/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace lifted {

namespace {

int default_threads() {
  if (const char* env = std::getenv("LIFTED_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

std::atomic<int> g_max_threads{0};

}  // namespace

int max_threads() {
  const int n = g_max_threads.load();
  return n >= 1 ? n : default_threads();
}

void set_max_threads(int n) { g_max_threads.store(n); }

}  // namespace lifted
