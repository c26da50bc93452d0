#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "fluctuant/dynamics.hpp"
#include "fluctuant/local_function.hpp"
#include "fluctuant/stats.hpp"

namespace fluctuant {

enum class Geometry { Interval, Ring };

// Canonical sector: every occupancy pattern with a fixed particle number,
// stored as sorted bit masks (bit i = site i).
struct Sector {
  Geometry geometry = Geometry::Ring;
  int sites = 0;
  int particles = 0;
  std::vector<std::uint64_t> states;

  // Index of a state mask, -1 if absent.
  int index_of(std::uint64_t state) const;
};

Sector make_sector(Geometry g, int sites, int particles);

// Dense generator on the sector: entry (s, s') is the rate s -> s', the
// diagonal the negated row sum. Ring sectors carry the model's full
// transition list. Interval sectors run exchange on the internal bonds
// (i, i+1), i = 0..sites-2, with rate windows reading 0 beyond the segment;
// only speed-change models make sense there, others are rejected.
std::vector<std::vector<double>> generator_matrix(const Model& model,
                                                  const Sector& sec);

// Eigenvalues of the symmetrized negated generator -(G + G^T)/2, ascending.
// Dense solve; sector must be small.
std::vector<double> symmetrized_spectrum(const Model& model, const Sector& sec);

// Smallest nonzero eigenvalue of -(G + G^T)/2. Dense solve up to dense_limit
// states, shift-inverted power iteration with constant-mode deflation above.
// DisconnectedSector if the sector has fewer than 2 states or the zero
// eigenvalue is degenerate.
double spectral_gap(const Model& model, const Sector& sec,
                    int dense_limit = 4000);

// Worst inverse relaxation constant over canonical segment sectors:
// max over ell in [2, max_sites], k in [1, ell-1] of 1 / (gap * ell^2).
double fit_kappa0(const Model& model, int max_sites);

// Dirichlet form of f on the segment [1, ell] under the product measure at
// density rho: sum over bonds (x, x+1), x = 1..ell-1, of
// E[(f(eta^{x,x+1}) - f(eta))^2]. Requires window <= ell <= 24.
double dirichlet_form(const LocalFunction& f, int ell, double rho);

// Squared H_{-1} norm of f on a sector: <f, u> under the uniform sector
// measure, u solving -S u = f on the orthogonal complement of constants
// (S the symmetrized generator). f is evaluated per state mask.
// NotMeanZero if f does not average to zero over the sector.
double h_minus_one_sq(const Model& model, const Sector& sec,
                      const std::function<double(std::uint64_t)>& f);

// Same, f a local function reading sites anchor+1 .. anchor+window of the
// sector's ring.
double h_minus_one_sq(const Model& model, const Sector& sec,
                      const LocalFunction& f, int anchor = 0);

struct KvResult {
  std::vector<double> t;      // grid, ascending
  std::vector<MeanCI> lhs;    // E[(int_0^t f(eta_s) ds)^2] per grid point
  std::vector<double> bound;  // 18 t ||f||_{-1}^2
  std::vector<double> ratio;  // lhs point estimate / t
  double h_sq = 0.0;
  bool pass = false;  // CI upper end below the bound at every t
};

// Monte Carlo check of the additive-functional second-moment bound
// E[(int_0^t f)^2] <= 18 t ||f||_{-1}^2, trajectories drawn from the uniform
// measure on the (sites, particles) ring sector. f is anchored at site 0.
KvResult kv_check(std::shared_ptr<const Model> model, int sites, int particles,
                  const LocalFunction& f, std::vector<double> t_grid,
                  int trajectories, std::uint64_t seed);

struct DiffusionResult {
  double value = 0.0;
  std::vector<double> by_radius;  // minima over nested bases, radius 0..k
  int rank = 0;                   // numerical rank of the largest Gram matrix
  bool ill_conditioned = false;   // a dropped direction carried signal
};

// Variational diffusion coefficient at density rho:
//   D(rho) = chi^{-1} inf_f E[ r_{0,1} * (eta(1) - eta(0)
//                                - grad_{0,1} sum_x tau_x f)^2 ],
// the infimum over the span of multilinear monomials supported in {-k..k}.
// Expectations are exact Bernoulli(rho) enumerations over the dependency
// window; each nested minimum is taken by eigen pseudo-inverse with cutoff
// 1e-12 * lambda_max. k <= 5 (cost grows like 16^k). The empty basis gives
// exactly 2 for unit-rate exchange; report() callers compare against a
// dynamic measurement rather than rescaling.
DiffusionResult variational_diffusion(const SpeedChangeModel& model,
                                      double rho, int k);

struct BlockCheckResult {
  MeanCI lhs;                   // E[(sum_i int_0^t f_i)^2]
  double bound = 0.0;           // (18 kappa0 t / eps0) sum_i len_i^2 Var f_i
  double kappa0 = 0.0;          // fitted from this model's sector gaps
  double additivity_gap = 0.0;  // |cross terms| relative to sum of squares
  bool pass = false;
};

// Disjoint-block additive functionals on a ring of n_sites at density rho:
// f_i anchored at anchors[i]. Every f_i must have an identically vanishing
// grand-canonical profile (NotMeanZero) and the anchored supports must be
// pairwise disjoint (OverlappingSupports).
BlockCheckResult block_orthogonality_check(
    std::shared_ptr<const SpeedChangeModel> model, int n_sites, double rho,
    const std::vector<LocalFunction>& fs, const std::vector<int>& anchors,
    double t, int trajectories, std::uint64_t seed);

}  // namespace fluctuant
