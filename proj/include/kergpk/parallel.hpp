#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kergpk {

/// Worker count: KERGPK_THREADS if set to a positive integer, else hardware concurrency.
inline std::size_t worker_count() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KERGPK_THREADS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return hw;
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}  // namespace detail

/// Runs body(i) for i in [0, count) over contiguous blocks, one block per worker.
/// Callers write results into per-index slots, so output never depends on the
/// worker count. The first exception thrown by any worker is rethrown.
/// Nested calls from inside a worker run serially.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, std::size_t workers = worker_count()) {
  workers = std::min(workers, count);
  if (workers <= 1 || detail::inside_parallel_region) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = count * w / workers;
    std::size_t end = count * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      detail::inside_parallel_region = true;
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Runs body(begin, end) over contiguous blocks of [0, count), one per worker.
/// Lets each worker set up scratch state once per block.
template <typename Body>
void parallel_blocks(std::size_t count, Body&& body, std::size_t workers = worker_count()) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  parallel_for(
      workers, [&](std::size_t w) { body(count * w / workers, count * (w + 1) / workers); }, workers);
}

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for sub-stream `index` of `stream` under a master seed. Depends only on its arguments.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

}  // namespace kergpk
