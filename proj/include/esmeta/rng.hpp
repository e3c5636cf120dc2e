#ifndef ESMETA_RNG_HPP_
#define ESMETA_RNG_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>

namespace esmeta {

// Mixes a list of integers into one 64-bit key (SplitMix64 finalizer chain).
// Used to derive independent stream keys from (master seed, purpose, index...).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

// Counter-based generator (Philox4x32-10). The whole stream is a pure function
// of (key, stream id): the n-th draw can be regenerated from the key alone,
// which is what lets workers exchange seeds instead of parameter vectors.
class Rng {
 public:
  explicit Rng(std::uint64_t key, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace esmeta

#endif  // ESMETA_RNG_HPP_
