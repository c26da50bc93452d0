#include "fluctuant/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <numeric>

namespace fluctuant {

Configuration::Configuration(int n_sites) : n_(n_sites) {
  assert(n_sites >= 1);
  bits_.assign((static_cast<std::size_t>(n_sites) + 63) / 64, 0u);
}

Configuration Configuration::bernoulli(int n_sites, double rho, RandomSource& rng) {
  Configuration c(n_sites);
  for (int x = 0; x < n_sites; ++x)
    if (rng.u01() <= rho) c.set(x, true);
  return c;
}

Configuration Configuration::canonical(int n_sites, int k, RandomSource& rng) {
  assert(k >= 0 && k <= n_sites);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  std::vector<int> idx(static_cast<std::size_t>(n_sites));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(
                          static_cast<std::uint64_t>(n_sites - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  Configuration c(n_sites);
  for (int i = 0; i < k; ++i) c.set(idx[static_cast<std::size_t>(i)], true);
  return c;
}

void Configuration::set(int x, bool v) {
  const int i = wrap(x);
  std::uint64_t& w = bits_[static_cast<std::size_t>(i) >> 6];
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  const bool old = w & mask;
  if (old == v) return;
  w ^= mask;
  count_ += v ? 1 : -1;
}

void Configuration::swap_sites(int x, int y) {
  const bool a = get(x), b = get(y);
  if (a == b) return;
  set(x, b);
  set(y, a);
}

int Configuration::linear_count(int a, int len) const {
  if (len <= 0) return 0;
  const int b = a + len;  // exclusive, b <= n_
  const std::size_t wa = static_cast<std::size_t>(a) >> 6;
  const std::size_t wb = static_cast<std::size_t>(b - 1) >> 6;
  const std::uint64_t lo_mask = ~std::uint64_t{0} << (a & 63);
  const std::uint64_t hi_mask = ~std::uint64_t{0} >> (63 - ((b - 1) & 63));
  if (wa == wb) return std::popcount(bits_[wa] & lo_mask & hi_mask);
  int c = std::popcount(bits_[wa] & lo_mask);
  for (std::size_t w = wa + 1; w < wb; ++w) c += std::popcount(bits_[w]);
  c += std::popcount(bits_[wb] & hi_mask);
  return c;
}

int Configuration::box_count(int x, int len) const {
  assert(len >= 1 && len <= n_);
  const int a = wrap(x + 1);
  if (a + len <= n_) return linear_count(a, len);
  return linear_count(a, n_ - a) + linear_count(0, len - (n_ - a));
}

int ring_size_for(int n_scale, double t_macro_max) {
  const int spread = static_cast<int>(std::ceil(std::sqrt(std::max(t_macro_max, 1.0))));
  return std::max(1024, 8 * n_scale * spread);
}

}  // namespace fluctuant
