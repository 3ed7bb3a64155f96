#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>

namespace ppcov {

//! Counter-based random stream.
//!
//! The k-th output is a pure function of (key, k), so a stream can be
//! reconstructed from its key alone and independent streams are obtained
//! by deriving keys from a master seed and a path of indices
//! (scenario, replicate, ...). Satisfies UniformRandomBitGenerator, so it
//! plugs into the <random> distributions.
class StreamRng
{
public:
  using result_type = std::uint64_t;

  explicit StreamRng(std::uint64_t key) : key_(key) {}

  //! Stream keyed by `seed` followed by every index in `path`.
  static StreamRng derive(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max()
  {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  //! Uniform double in [0, 1) with 53 random bits.
  double uniform();

  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

//! SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

//! Runs body(i) for i in [0, count) on up to `jobs` threads. Each index is
//! executed exactly once; callers write results into index-addressed slots,
//! which makes the outcome independent of `jobs`. The first exception thrown
//! by any body is rethrown after all workers have joined.
void parallel_for(std::size_t count,
                  unsigned jobs,
                  const std::function<void(std::size_t)>& body);

} // namespace ppcov
