#pragma once

#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace ssllab {

/// Run `compute(i)` for i in [0, n_cells) on `workers` threads and hand the
/// results to `emit(i, result)` in strict index order, regardless of
/// completion order.  emit runs under a mutex (single writer), and only ever
/// sees the contiguous completed prefix, so a consumer streaming rows to a
/// file gets a deterministic, prefix-complete artifact even if the run dies
/// midway.  The first exception (from compute or emit) stops dispatch; the
/// remaining workers finish their current cell, the completed prefix is
/// drained, and the exception is rethrown.
template <typename Compute, typename Emit>
void run_cells(std::size_t n_cells, int workers,
               Compute&& compute, Emit&& emit) {
  if (workers < 1) workers = 1;

  std::vector<std::optional<decltype(compute(std::size_t{0}))>> slots(n_cells);
  std::mutex mu;
  std::size_t next_dispatch = 0;
  std::size_t next_emit = 0;
  std::exception_ptr first_error;

  // Caller context owns the drain so emit never runs concurrently with
  // itself; workers only park results in their slot.
  auto drain_prefix_locked = [&]() {
    while (next_emit < n_cells && slots[next_emit].has_value()) {
      emit(next_emit, *slots[next_emit]);
      slots[next_emit].reset();
      ++next_emit;
    }
  };

  auto work = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (first_error || next_dispatch >= n_cells) return;
        i = next_dispatch++;
      }
      try {
        auto result = compute(i);
        std::lock_guard<std::mutex> lock(mu);
        slots[i].emplace(std::move(result));
        drain_prefix_locked();
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  std::lock_guard<std::mutex> lock(mu);
  drain_prefix_locked();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ssllab
