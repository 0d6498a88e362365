#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <utility>
#include <vector>

namespace ldfactor {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }

  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum s;
  for (double v : values) s.add(v);
  return s.value();
}

/// Count, compensated total and centered second moment of a batch of draws.
/// Batches merge with Chan's pairwise update, so merging the same batches in
/// the same order is bit-reproducible.
struct SampleMoments {
  std::uint64_t count = 0;
  double total = 0.0;
  double m2 = 0.0;

  static SampleMoments from(std::span<const double> values) {
    SampleMoments out;
    out.count = values.size();
    if (values.empty()) return out;
    out.total = compensated_sum(values);
    const double mean = out.total / static_cast<double>(out.count);
    CompensatedSum dev;
    for (double v : values) dev.add((v - mean) * (v - mean));
    out.m2 = dev.value();
    return out;
  }

  [[nodiscard]] double mean() const noexcept {
    return count == 0 ? 0.0 : total / static_cast<double>(count);
  }

  /// Unbiased sample variance; zero for fewer than two draws.
  [[nodiscard]] double variance() const noexcept {
    return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
  }
};

/// Merges per-block moments strictly in block order.
inline SampleMoments merge_in_order(std::span<const SampleMoments> blocks) {
  SampleMoments acc;
  CompensatedSum total;
  for (const auto& b : blocks) {
    if (b.count == 0) continue;
    if (acc.count == 0) {
      acc = b;
      total = CompensatedSum{};
      total.add(b.total);
      continue;
    }
    const double na = static_cast<double>(acc.count);
    const double nb = static_cast<double>(b.count);
    const double delta = b.mean() - acc.mean();
    acc.m2 = acc.m2 + b.m2 + delta * delta * na * nb / (na + nb);
    acc.count += b.count;
    total.add(b.total);
    acc.total = total.value();
  }
  return acc;
}

/// Fixed number of Monte Carlo iterations per block. Block boundaries, not
/// worker counts, determine which random stream an iteration reads from.
inline constexpr std::uint64_t kBlockSize = 64;

inline std::uint64_t block_count(std::uint64_t iters,
                                 std::uint64_t block_size = kBlockSize) {
  return (iters + block_size - 1) / block_size;
}

/// Runs `fn(block_index, begin, end)` for every block of the iteration space
/// `[0, iters)` on up to `workers` threads and returns the results indexed by
/// block. `workers == 0` means one per hardware thread.
template <class Result>
std::vector<Result> run_blocks(
    std::uint64_t iters, unsigned workers,
    const std::function<Result(std::uint64_t, std::uint64_t, std::uint64_t)>&
        fn,
    std::uint64_t block_size = kBlockSize) {
  const std::uint64_t blocks = block_count(iters, block_size);
  std::vector<Result> out(blocks);
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  const auto run_one = [&](std::uint64_t b) {
    const std::uint64_t begin = b * block_size;
    const std::uint64_t end = std::min(iters, begin + block_size);
    out[b] = fn(b, begin, end);
  };
  if (workers == 1 || blocks <= 1) {
    for (std::uint64_t b = 0; b < blocks; ++b) run_one(b);
    return out;
  }

  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::uint64_t>(workers, blocks));
  pool.reserve(n_threads);
  for (unsigned w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (std::uint64_t b = next++; b < blocks; b = next++) {
        try {
          run_one(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = blocks;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace ldfactor
