#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace fluctuant {

// Complete binary tree over a fixed number of nonnegative leaf weights.
// set() recomputes every ancestor from its two children, so internal nodes
// are always exact sums of current leaves up to the rounding of those sums
// themselves; there is no incremental drift term to accumulate.
class SumTree {
 public:
  explicit SumTree(std::size_t n_leaves) : n_(n_leaves) {
    cap_ = 1;
    while (cap_ < n_) cap_ <<= 1;
    node_.assign(2 * cap_, 0.0);
  }

  std::size_t size() const { return n_; }
  double total() const { return node_[1]; }
  double leaf(std::size_t i) const { return node_[cap_ + i]; }

  void set(std::size_t i, double w) {
    assert(i < n_ && w >= 0.0);
    std::size_t p = cap_ + i;
    node_[p] = w;
    for (p >>= 1; p >= 1; p >>= 1) node_[p] = node_[2 * p] + node_[2 * p + 1];
  }

  // Index of the leaf whose cumulative-weight interval contains v, v in
  // [0, total()). Descends once per level; if rounding lands the walk on a
  // zero-weight leaf, steps to the nearest positive one.
  std::size_t sample(double v) const {
    std::size_t i = 1;
    while (i < cap_) {
      i <<= 1;
      const double left = node_[i];
      if (v >= left) {
        v -= left;
        i += 1;
      }
    }
    std::size_t idx = i - cap_;
    if (node_[cap_ + idx] <= 0.0) {
      std::size_t lo = idx;
      while (lo > 0 && node_[cap_ + lo] <= 0.0) --lo;
      if (node_[cap_ + lo] > 0.0) return lo;
      std::size_t hi = idx;
      while (hi + 1 < n_ && node_[cap_ + hi] <= 0.0) ++hi;
      return hi;
    }
    return idx;
  }

  // Write a leaf without touching ancestors; pair with rebuild().
  void stage(std::size_t i, double w) {
    assert(i < n_ && w >= 0.0);
    node_[cap_ + i] = w;
  }

  // Recompute every internal node bottom-up from the current leaves.
  void rebuild() {
    for (std::size_t p = cap_ - 1; p >= 1; --p)
      node_[p] = node_[2 * p] + node_[2 * p + 1];
  }

 private:
  std::size_t n_;
  std::size_t cap_;
  std::vector<double> node_;
};

// Compensated (Kahan) accumulator for long event-driven sums.
struct KahanAccumulator {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }

  double value() const { return sum; }

  void reset() {
    sum = 0.0;
    carry = 0.0;
  }
};

}  // namespace fluctuant
