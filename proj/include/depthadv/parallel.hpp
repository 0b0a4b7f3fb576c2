#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace depthadv {

// Deterministic fan-out over independent jobs: results only depend on
// the job index, never on scheduling. Thread count 0 = hardware default.
inline void parallel_for(std::size_t n, std::function<void(std::size_t)> fn,
                         unsigned threads = 0) {
  if (n == 0) return;
  unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  if (t > n) t = unsigned(n);
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> workers;
  workers.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    workers.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += t) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : workers) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace depthadv
