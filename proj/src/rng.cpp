#include "mgs/rng.hpp"

#include <stdexcept>

namespace mgs {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  key_ = h;
}

CounterRng::result_type CounterRng::operator()() {
  return mix64(key_ + 0x632be59bd9b4e019ULL * ++counter_);
}

std::uint64_t CounterRng::uniform_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("uniform_below: bound must be positive");
  }
  // Lemire's multiply-shift with rejection.
  unsigned __int128 product = static_cast<unsigned __int128>((*this)()) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>((*this)()) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

double CounterRng::uniform01() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

std::uint64_t tagged_seed(std::uint64_t seed, StreamTag tag) {
  return mix64(seed ^ (static_cast<std::uint64_t>(tag) * 0xd1b54a32d192ed03ULL));
}

std::uint64_t draw_sample_index(std::uint64_t seed, std::uint64_t agent, std::uint64_t round,
                                std::uint64_t draw, std::uint64_t n) {
  CounterRng rng(tagged_seed(seed, StreamTag::sample_index), agent, round, draw);
  return rng.uniform_below(n);
}

}  // namespace mgs
