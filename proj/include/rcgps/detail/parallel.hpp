#pragma once

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace rcgps::detail {

inline unsigned thread_count() {
  if (const char* env = std::getenv("RCGPS_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) return static_cast<unsigned>(requested);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs body(i) for i in [0, count). Work items must be independent and
// deterministic in i (counter-derived RNG streams), so results do not
// depend on the schedule.
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t)>& body) {
  const unsigned threads = std::min<std::size_t>(thread_count(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (std::size_t i = t; i < count; i += threads) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& worker : pool) worker.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace rcgps::detail
