#pragma once

#include <cstdint>

namespace fluctuant {

// Counter-based PRNG (Philox-4x32-10). A (master_seed, stream_index) pair
// names an independent stream; streams never share state, so trajectory k can
// always draw from stream k regardless of which worker thread runs it, and
// ensemble output is independent of the worker count.
//
// Distribution helpers are hand-implemented so sequences are identical across
// standard libraries: u01 in (0,1], inversion for exponential, polar
// Box-Muller for normal.
class RandomSource {
 public:
  RandomSource(std::uint64_t master_seed, std::uint64_t stream_index)
      : key0_(static_cast<std::uint32_t>(master_seed)),
        key1_(static_cast<std::uint32_t>(master_seed >> 32)),
        stream_(stream_index) {}

  std::uint64_t next_u64();

  // Uniform on (0,1]; never returns 0, so log(u01()) is always finite.
  double u01();

  // Uniform integer in [0, n), n >= 1; rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Exponential with the given rate (rate > 0).
  double exponential(double rate);

  // Standard normal.
  double normal();

  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint32_t key0_, key1_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::uint64_t buf_[2] = {0, 0};
  int avail_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fluctuant
