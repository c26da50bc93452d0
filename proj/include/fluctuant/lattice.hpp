#pragma once

#include <cstdint>
#include <vector>

#include "fluctuant/rng.hpp"

namespace fluctuant {

// Occupancy configuration on a ring of N sites, one bit per site, packed into
// 64-bit words. Site indices are arbitrary ints and wrap mod N. The particle
// count is maintained on every mutation.
class Configuration {
 public:
  explicit Configuration(int n_sites);

  // Product measure: each site occupied independently with probability rho.
  static Configuration bernoulli(int n_sites, double rho, RandomSource& rng);

  // Uniform over configurations with exactly k particles.
  static Configuration canonical(int n_sites, int k, RandomSource& rng);

  int sites() const { return n_; }
  int particles() const { return count_; }

  int wrap(int x) const {
    int r = x % n_;
    return r < 0 ? r + n_ : r;
  }

  bool get(int x) const {
    const int i = wrap(x);
    return (bits_[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1u;
  }

  void set(int x, bool v);

  // Exchange the occupancies of sites x and y.
  void swap_sites(int x, int y);

  // Number of particles on sites x+1, ..., x+len (len in [1, N]).
  int box_count(int x, int len) const;

  // box_count / len.
  double box_average(int x, int len) const {
    return static_cast<double>(box_count(x, len)) / static_cast<double>(len);
  }

  bool operator==(const Configuration& o) const {
    return n_ == o.n_ && bits_ == o.bits_;
  }

 private:
  // Particles on the linear (non-wrapping) site range [a, a+len), a in [0,N).
  int linear_count(int a, int len) const;

  int n_;
  int count_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Ring size for a hydrodynamic run: large enough that information travelling
// diffusively from the test-function support cannot wrap within the horizon.
int ring_size_for(int n_scale, double t_macro_max);

}  // namespace fluctuant
