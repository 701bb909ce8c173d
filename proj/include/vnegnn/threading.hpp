#pragma once

#include <cstdlib>
#include <thread>

namespace vnegnn {

// Worker count: VNEGNN_THREADS when set, else hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("VNEGNN_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace vnegnn
