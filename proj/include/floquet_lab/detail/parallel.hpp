#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace flab {

template <typename R>
std::vector<R> parallel_map(std::size_t n, const std::function<R(std::size_t)>& job) {
  std::vector<std::optional<R>> slots(n);
  const std::size_t workers = std::min<std::size_t>(sweep_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) slots[i].emplace(job(i));
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            slots[i].emplace(job(i));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    // Lowest failing index wins, independent of scheduling.
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace flab
