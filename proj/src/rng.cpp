#include "ppcov/rng.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ppcov {

namespace {
constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x)
{
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

StreamRng StreamRng::derive(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> path)
{
  std::uint64_t key = mix64(seed + golden_gamma);
  for (std::uint64_t index : path) {
    key = mix64(key ^ mix64(index + 0x632BE59BD9B4E019ULL));
  }
  return StreamRng(key);
}

StreamRng::result_type StreamRng::operator()()
{
  // two rounds of mixing decorrelate neighbouring keys
  std::uint64_t x = key_ + golden_gamma * (++counter_);
  return mix64(mix64(x) ^ key_);
}

double StreamRng::uniform()
{
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

void parallel_for(std::size_t count,
                  unsigned jobs,
                  const std::function<void(std::size_t)>& body)
{
  if (count == 0) {
    return;
  }
  unsigned workers = std::max(1u, jobs);
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }

  std::atomic<std::size_t> next{ 0 };
  std::atomic<bool> failed{ false };
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) {
        return;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          first_error = std::current_exception();
        }
        failed = true;
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

} // namespace ppcov
