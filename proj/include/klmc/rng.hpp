#pragma once

#include <cstdint>
#include <random>

namespace klmc {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// A block of standard normal draws with a deterministic position in the
/// global noise layout. Blocks are keyed by (seed, stream, counter): one
/// stream per chain, one counter value per sampler step, so a KLMC2 chain and
/// a KLMC chain sharing a stream see identical leading draws in every step.
class GaussianBlock {
 public:
  GaussianBlock(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
      : engine_(splitmix64(splitmix64(splitmix64(seed) ^ splitmix64(stream)) ^
                           splitmix64(counter))) {}

  double next() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Counter-based splittable source of Gaussian noise for one chain.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  /// Fresh block for the given step counter; block 0 is reserved for the
  /// initial condition, step k of a chain uses block k+1.
  GaussianBlock block(std::uint64_t counter) const {
    return GaussianBlock(seed_, stream_, counter);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace klmc
