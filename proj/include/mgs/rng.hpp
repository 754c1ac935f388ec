#pragma once

#include <cstdint>
#include <limits>

namespace mgs {

/// Counter-based random stream keyed by up to four integers.
///
/// Every output is a pure function of (key, counter), so any stream can be
/// recreated from its key alone. Runs on different threads, or a twin run in
/// a stability experiment, obtain identical draws by constructing the same
/// key. Satisfies UniformRandomBitGenerator, so it plugs into the standard and
/// Boost distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                      std::uint64_t c = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// Stream tags keep the purposes of different draws apart.
enum class StreamTag : std::uint64_t {
  sample_index = 1,
  central_index = 2,
  synth_data = 3,
  partition = 4,
  perturbation = 5,
  initialization = 6,
  probe = 7,
};

/// Seed for a purpose-specific family of streams derived from a user seed.
std::uint64_t tagged_seed(std::uint64_t seed, StreamTag tag);

/// Index of draw `draw` taken by `agent` in `round`, uniform on [0, n).
std::uint64_t draw_sample_index(std::uint64_t seed, std::uint64_t agent, std::uint64_t round,
                                std::uint64_t draw, std::uint64_t n);

}  // namespace mgs
