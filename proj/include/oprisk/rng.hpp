#ifndef OPRISK_RNG_HPP
#define OPRISK_RNG_HPP

#include <cstdint>
#include <random>

namespace oprisk {

/**
 * A reproducible random stream identified by (seed, stream_index).
 *
 * Each stream is an independent std::mt19937_64 seeded from a hash of both
 * identifiers, so Monte Carlo replication k can own stream k and produce the
 * same draws whatever thread runs it. Variates are
 * generated by this library's own transforms rather than <random>
 * distributions, whose output is implementation-defined.
 */
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index)
      : seed_(seed), stream_index_(stream_index), engine_(make_engine(seed, stream_index)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  /// Uniform on the open interval (0, 1); (k + 1/2) / 2^52 is exact, so 0 and 1 never occur.
  double uniform() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  std::uint64_t next_u64() { return engine_(); }

private:
  // SplitMix64 finalizer; decorrelates neighbouring (seed, stream) pairs before they reach the engine
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(mix(mix(seed + 0x9e3779b97f4a7c15ULL) ^ (stream + 0x6f70726973ULL)));
  }

  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

} // namespace oprisk

#endif // OPRISK_RNG_HPP
