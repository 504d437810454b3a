#ifndef LIGHTCONE_PARALLEL_HPP
#define LIGHTCONE_PARALLEL_HPP

// Minimal deterministic work-sharing: results are written by index, so the
// output never depends on scheduling.  LIGHTCONE_THREADS caps the pool.

#include <cstdlib>
#include <thread>
#include <vector>

#include "lightcone/common.hpp"

namespace lightcone {

inline int thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LIGHTCONE_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return (int)std::min<long>(v, 64);
  }
  return (int)std::min(hw, 16u);
}

// fn(i) for i in [0, n); exceptions are rethrown on the caller thread.
template <class Fn>
void parallel_for(size_t n, Fn&& fn) {
  int nt = std::min<size_t>(thread_count(), n ? n : 1);
  if (nt <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (size_t i = t; i < n; i += nt) fn(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace lightcone

#endif  // LIGHTCONE_PARALLEL_HPP
