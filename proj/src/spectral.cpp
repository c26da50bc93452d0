#include "fluctuant/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>

#include "fluctuant/errors.hpp"
#include "fluctuant/observers.hpp"
#include "fluctuant/rng.hpp"

namespace fluctuant {

namespace {

// Number of states C(n, k), guarded against blowup.
std::size_t sector_size(int n, int k) {
  long double c = 1.0L;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return static_cast<std::size_t>(std::llround(static_cast<double>(c)));
}

// The interval runs exchange dynamics on a padded ring: segment site i sits
// at ring site i+1, the padding (site 0 and everything past the segment)
// stays empty, so rate windows of internal bonds read 0 outside the segment
// and no transition touches the padding.
struct IntervalEmbedding {
  const SpeedChangeModel* model;
  int ring_sites;  // sites + 2R + 2
};

IntervalEmbedding interval_embedding(const Model& model, const Sector& sec) {
  const auto* sc = dynamic_cast<const SpeedChangeModel*>(&model);
  if (!sc)
    throw Error("interval sectors support exchange dynamics only");
  return {sc, sec.sites + 2 * sc->radius() + 2};
}

Configuration config_from_mask(std::uint64_t mask, int n_sites, int shift) {
  Configuration cfg(n_sites);
  for (std::uint64_t m = mask; m; m &= m - 1)
    cfg.set(std::countr_zero(m) + shift, true);
  return cfg;
}

std::uint64_t mask_from_config(const Configuration& cfg, int count, int shift) {
  std::uint64_t mask = 0;
  for (int i = 0; i < count; ++i)
    if (cfg.get(i + shift)) mask |= std::uint64_t{1} << i;
  return mask;
}

using Triplet = Eigen::Triplet<double>;

// Off-diagonal rates of the generator, as (row, col, rate) triplets.
// Diagonal entries are emitted too (negated row sums).
std::vector<Triplet> generator_triplets(const Model& model, const Sector& sec) {
  std::vector<Triplet> trip;
  const int m = static_cast<int>(sec.states.size());
  if (sec.geometry == Geometry::Ring) {
    const std::size_t leaves = model.leaf_count(sec.sites);
    for (int s = 0; s < m; ++s) {
      const Configuration cfg = config_from_mask(sec.states[s], sec.sites, 0);
      double out = 0.0;
      for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        const double rate = model.leaf_rate(cfg, leaf);
        if (rate <= 0.0) continue;
        Configuration next = cfg;
        model.apply(next, leaf);
        const int j = sec.index_of(mask_from_config(next, sec.sites, 0));
        if (j < 0) throw Error("transition left the sector");
        trip.emplace_back(s, j, rate);
        out += rate;
      }
      trip.emplace_back(s, s, -out);
    }
  } else {
    const IntervalEmbedding emb = interval_embedding(model, sec);
    for (int s = 0; s < m; ++s) {
      const Configuration cfg =
          config_from_mask(sec.states[s], emb.ring_sites, 1);
      double out = 0.0;
      for (int bond = 1; bond <= sec.sites - 1; ++bond) {
        const double rate =
            emb.model->leaf_rate(cfg, static_cast<std::size_t>(bond));
        if (rate <= 0.0) continue;
        Configuration next = cfg;
        emb.model->apply(next, static_cast<std::size_t>(bond));
        const int j = sec.index_of(mask_from_config(next, sec.sites, 1));
        if (j < 0) throw Error("transition left the sector");
        trip.emplace_back(s, j, rate);
        out += rate;
      }
      trip.emplace_back(s, s, -out);
    }
  }
  return trip;
}

Eigen::MatrixXd dense_minus_symmetrized(const std::vector<Triplet>& trip,
                                        int m) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for (const Triplet& t : trip) g(t.row(), t.col()) += t.value();
  return -0.5 * (g + g.transpose());
}

Eigen::SparseMatrix<double> sparse_minus_symmetrized(
    const std::vector<Triplet>& trip, int m) {
  std::vector<Triplet> sym;
  sym.reserve(2 * trip.size());
  for (const Triplet& t : trip) {
    sym.emplace_back(t.row(), t.col(), -0.5 * t.value());
    sym.emplace_back(t.col(), t.row(), -0.5 * t.value());
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(sym.begin(), sym.end());
  return a;
}

// Smallest nonzero eigenvalue of the sparse psd matrix whose kernel is the
// constants: shift-inverted power iteration with the constant mode projected
// out of every iterate.
double iterative_gap(const Eigen::SparseMatrix<double>& a, int m) {
  double dmax = 0.0;
  for (int i = 0; i < m; ++i) dmax = std::max(dmax, a.coeff(i, i));
  const double sigma = std::max(1e-8 * dmax, 1e-30);
  Eigen::SparseMatrix<double> shifted = a;
  for (int i = 0; i < m; ++i) shifted.coeffRef(i, i) += sigma;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw Error("sparse factorization failed");

  RandomSource rng(0x5eedc0de, 0);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = rng.normal();
  auto deflate = [&](Eigen::VectorXd& v) { v.array() -= v.mean(); };
  deflate(x);
  x.normalize();

  double prev = std::numeric_limits<double>::infinity();
  int calm = 0;
  for (int it = 0; it < 50000; ++it) {
    Eigen::VectorXd y = solver.solve(x);
    deflate(y);
    y.normalize();
    const double q = y.dot(a * y);
    if (std::abs(q - prev) <= 1e-11 * std::max(std::abs(q), 1e-30)) {
      if (++calm >= 3) return q;
    } else {
      calm = 0;
    }
    prev = q;
    x.swap(y);
  }
  return prev;
}

}  // namespace

int Sector::index_of(std::uint64_t state) const {
  const auto it = std::lower_bound(states.begin(), states.end(), state);
  if (it == states.end() || *it != state) return -1;
  return static_cast<int>(it - states.begin());
}

Sector make_sector(Geometry g, int sites, int particles) {
  if (sites < 1 || sites > 62)
    throw Error("sector sites must be in [1, 62]");
  if (particles < 0 || particles > sites)
    throw Error("sector particle number out of range");
  if (sector_size(sites, particles) > std::size_t{5'000'000})
    throw Error("sector too large to enumerate");
  Sector sec;
  sec.geometry = g;
  sec.sites = sites;
  sec.particles = particles;
  if (particles == 0) {
    sec.states = {0};
    return sec;
  }
  // Gosper's hack walks the k-subsets of [0, sites) in increasing mask order.
  std::uint64_t v = (std::uint64_t{1} << particles) - 1;
  const std::uint64_t limit = std::uint64_t{1} << sites;
  while (v < limit) {
    sec.states.push_back(v);
    const std::uint64_t c = v & (~v + 1);
    const std::uint64_t r = v + c;
    v = (((r ^ v) >> 2) / c) | r;
  }
  return sec;
}

std::vector<std::vector<double>> generator_matrix(const Model& model,
                                                  const Sector& sec) {
  const int m = static_cast<int>(sec.states.size());
  std::vector<std::vector<double>> g(
      static_cast<std::size_t>(m),
      std::vector<double>(static_cast<std::size_t>(m), 0.0));
  for (const Triplet& t : generator_triplets(model, sec))
    g[static_cast<std::size_t>(t.row())][static_cast<std::size_t>(t.col())] +=
        t.value();
  return g;
}

std::vector<double> symmetrized_spectrum(const Model& model,
                                         const Sector& sec) {
  const int m = static_cast<int>(sec.states.size());
  const Eigen::MatrixXd a =
      dense_minus_symmetrized(generator_triplets(model, sec), m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  std::vector<double> out(eig.eigenvalues().data(),
                          eig.eigenvalues().data() + m);
  return out;
}

double spectral_gap(const Model& model, const Sector& sec, int dense_limit) {
  const int m = static_cast<int>(sec.states.size());
  if (m < 2) throw DisconnectedSector("sector has fewer than 2 states");
  double gap;
  double scale;
  if (m <= dense_limit) {
    const std::vector<double> ev = symmetrized_spectrum(model, sec);
    scale = std::max(std::abs(ev.front()), std::abs(ev.back()));
    gap = ev[1];
  } else {
    const Eigen::SparseMatrix<double> a =
        sparse_minus_symmetrized(generator_triplets(model, sec), m);
    gap = iterative_gap(a, m);
    scale = 0.0;
    for (int i = 0; i < m; ++i) scale = std::max(scale, a.coeff(i, i));
  }
  if (gap <= 1e-12 * std::max(scale, 1.0))
    throw DisconnectedSector("zero eigenvalue is degenerate");
  return gap;
}

double fit_kappa0(const Model& model, int max_sites) {
  if (max_sites < 2) throw Error("fit_kappa0 needs max_sites >= 2");
  double kappa = 0.0;
  for (int ell = 2; ell <= max_sites; ++ell) {
    for (int k = 1; k <= ell - 1; ++k) {
      const Sector sec = make_sector(Geometry::Interval, ell, k);
      const double gap = spectral_gap(model, sec);
      kappa = std::max(kappa, 1.0 / (gap * ell * ell));
    }
  }
  return kappa;
}

double dirichlet_form(const LocalFunction& f, int ell, double rho) {
  if (ell < 2 || ell > 20) throw Error("dirichlet_form: ell must be in [2, 20]");
  if (f.window() > ell) throw Error("dirichlet_form: window exceeds ell");
  const std::uint64_t n_cfg = std::uint64_t{1} << ell;
  std::vector<double> fv(n_cfg);
  for (std::uint64_t bits = 0; bits < n_cfg; ++bits)
    fv[bits] = f.eval_bits(bits);
  std::vector<double> wp(static_cast<std::size_t>(ell) + 1);
  for (int p = 0; p <= ell; ++p)
    wp[static_cast<std::size_t>(p)] =
        std::pow(rho, p) * std::pow(1.0 - rho, ell - p);
  double acc = 0.0;
  for (std::uint64_t bits = 0; bits < n_cfg; ++bits) {
    const double w = wp[static_cast<std::size_t>(std::popcount(bits))];
    for (int x = 1; x <= ell - 1; ++x) {
      const std::uint64_t pair =
          (std::uint64_t{1} << (x - 1)) | (std::uint64_t{1} << x);
      const std::uint64_t hit = bits & pair;
      if (hit == 0 || hit == pair) continue;  // concordant bond, gradient 0
      const double df = fv[bits ^ pair] - fv[bits];
      acc += w * df * df;
    }
  }
  return acc;
}

double h_minus_one_sq(const Model& model, const Sector& sec,
                      const std::function<double(std::uint64_t)>& f) {
  const int m = static_cast<int>(sec.states.size());
  if (m < 2) throw DisconnectedSector("sector has fewer than 2 states");
  Eigen::VectorXd fv(m);
  double fmax = 0.0;
  for (int s = 0; s < m; ++s) {
    fv[s] = f(sec.states[static_cast<std::size_t>(s)]);
    fmax = std::max(fmax, std::abs(fv[s]));
  }
  const double mean = fv.mean();
  if (std::abs(mean) > 1e-10 * std::max(1.0, fmax))
    throw NotMeanZero("h_minus_one: f must average to zero over the sector");
  fv.array() -= mean;  // strip rounding residue

  const std::vector<Triplet> trip = generator_triplets(model, sec);
  if (m <= 4000) {
    Eigen::MatrixXd a = dense_minus_symmetrized(trip, m);
    const double c = std::max(1.0, a.diagonal().maxCoeff());
    // Rank-one shift pins the constant mode; f is orthogonal to it, so the
    // solution solves -S u = f with mean zero.
    a.array() += c / m;
    const Eigen::VectorXd u = Eigen::LDLT<Eigen::MatrixXd>(a).solve(fv);
    return fv.dot(u) / m;
  }
  // Large sector: conjugate gradient on the complement of constants.
  const Eigen::SparseMatrix<double> a = sparse_minus_symmetrized(trip, m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd r = fv;
  Eigen::VectorXd p = r;
  double rs = r.squaredNorm();
  const double tol = 1e-24 * rs;
  for (int it = 0; it < 10 * m && rs > tol; ++it) {
    Eigen::VectorXd ap = a * p;
    ap.array() -= ap.mean();
    const double alpha = rs / p.dot(ap);
    u += alpha * p;
    r -= alpha * ap;
    r.array() -= r.mean();
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return fv.dot(u) / m;
}

double h_minus_one_sq(const Model& model, const Sector& sec,
                      const LocalFunction& f, int anchor) {
  return h_minus_one_sq(model, sec, [&](std::uint64_t state) {
    const Configuration cfg = config_from_mask(state, sec.sites, 0);
    return f.eval(cfg, anchor);
  });
}

KvResult kv_check(std::shared_ptr<const Model> model, int sites, int particles,
                  const LocalFunction& f, std::vector<double> t_grid,
                  int trajectories, std::uint64_t seed) {
  if (t_grid.empty() || trajectories < 8)
    throw Error("kv_check: need a grid and at least 8 trajectories");
  KvResult out;
  out.t = std::move(t_grid);
  const Sector sec = make_sector(Geometry::Ring, sites, particles);
  out.h_sq = h_minus_one_sq(*model, sec, f, 0);

  const std::size_t nt = out.t.size();
  std::vector<std::vector<double>> samples(
      nt, std::vector<double>(static_cast<std::size_t>(trajectories)));
  for (int j = 0; j < trajectories; ++j) {
    RandomSource rng(seed, static_cast<std::uint64_t>(j));
    Configuration cfg = Configuration::canonical(sites, particles, rng);
    SimulationState st(std::move(cfg), model, std::move(rng));
    AdditiveObserver obs(f, {}, 1.0);
    std::vector<Observer*> obslist{&obs};
    const EvolveResult ev = evolve(st, out.t, obslist);
    for (std::size_t i = 0; i < nt; ++i)
      samples[i][static_cast<std::size_t>(j)] = ev.values[0][i];
  }
  out.pass = true;
  for (std::size_t i = 0; i < nt; ++i) {
    out.lhs.push_back(jackknife_mean_sq(samples[i]));
    out.bound.push_back(18.0 * out.t[i] * out.h_sq);
    out.ratio.push_back(out.lhs[i].value / out.t[i]);
    if (out.lhs[i].hi > out.bound[i]) out.pass = false;
  }
  return out;
}

DiffusionResult variational_diffusion(const SpeedChangeModel& model,
                                      double rho, int k) {
  if (k < 0 || k > 5) throw Error("variational_diffusion: k must be in [0, 5]");
  const int radius = model.radius();
  const int wlo = std::min(-2 * k, -radius);
  const int whi = std::max(2 * k + 1, radius + 1);
  const int width = whi - wlo + 1;
  if (width > 24) throw Error("variational_diffusion: window too large");

  // Multilinear monomials supported in {-k..k}; translate masks that touch
  // the exchanged pair {0, 1}.
  struct Monomial {
    int radius;
    std::vector<std::uint64_t> touching;  // site masks over the window
  };
  std::vector<Monomial> mono;
  const int span = 2 * k + 1;
  for (std::uint32_t sel = 1; sel < (1u << span); ++sel) {
    Monomial mm;
    mm.radius = 0;
    for (int i = 0; i < span; ++i)
      if ((sel >> i) & 1u) mm.radius = std::max(mm.radius, std::abs(i - k));
    const std::uint64_t pair01 = (std::uint64_t{1} << (0 - wlo)) |
                                 (std::uint64_t{1} << (1 - wlo));
    for (int x = -k; x <= k + 1; ++x) {
      std::uint64_t mask = 0;
      for (int i = 0; i < span; ++i)
        if ((sel >> i) & 1u)
          mask |= std::uint64_t{1} << (i - k + x - wlo);
      if (mask & pair01) mm.touching.push_back(mask);
    }
    mono.push_back(std::move(mm));
  }
  const int nm = static_cast<int>(mono.size());

  std::vector<double> wp(static_cast<std::size_t>(width) + 1);
  for (int p = 0; p <= width; ++p)
    wp[static_cast<std::size_t>(p)] =
        std::pow(rho, p) * std::pow(1.0 - rho, width - p);

  const std::uint64_t bit0 = std::uint64_t{1} << (0 - wlo);
  const std::uint64_t bit1 = std::uint64_t{1} << (1 - wlo);
  const int table_bits = 2 * radius + 2;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nm, nm);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(nm);
  double base = 0.0;  // E[r (eta(1) - eta(0))^2]
  std::vector<int> nz_idx(static_cast<std::size_t>(nm));
  std::vector<double> nz_val(static_cast<std::size_t>(nm));

  const std::uint64_t n_cfg = std::uint64_t{1} << width;
  for (std::uint64_t cfg = 0; cfg < n_cfg; ++cfg) {
    const bool b0 = (cfg & bit0) != 0;
    const bool b1 = (cfg & bit1) != 0;
    if (b0 == b1) continue;  // gradient and exchange both vanish
    std::uint64_t idx = 0;
    for (int i = 0; i < table_bits; ++i)
      if (cfg & (std::uint64_t{1} << (-radius + i - wlo)))
        idx |= std::uint64_t{1} << i;
    const double r = model.table()[static_cast<std::size_t>(idx)];
    const double w = wp[static_cast<std::size_t>(std::popcount(cfg))];
    const double wr = w * r;
    const double g0 = b1 ? 1.0 : -1.0;
    base += wr;

    const std::uint64_t swapped = cfg ^ (bit0 | bit1);
    int nz = 0;
    for (int i = 0; i < nm; ++i) {
      int g = 0;
      for (const std::uint64_t mask : mono[static_cast<std::size_t>(i)].touching)
        g += static_cast<int>((swapped & mask) == mask) -
             static_cast<int>((cfg & mask) == mask);
      if (g != 0) {
        nz_idx[static_cast<std::size_t>(nz)] = i;
        nz_val[static_cast<std::size_t>(nz)] = g;
        ++nz;
      }
    }
    for (int p = 0; p < nz; ++p) {
      const int i = nz_idx[static_cast<std::size_t>(p)];
      const double gi = nz_val[static_cast<std::size_t>(p)];
      lin[i] += wr * g0 * gi;
      for (int q = p; q < nz; ++q)
        gram(i, nz_idx[static_cast<std::size_t>(q)]) +=
            wr * gi * nz_val[static_cast<std::size_t>(q)];
    }
  }
  for (int i = 0; i < nm; ++i)
    for (int j = i + 1; j < nm; ++j) {
      const double v = gram(i, j) + gram(j, i);
      gram(i, j) = gram(j, i) = v;  // fold both update orders together
    }

  DiffusionResult out;
  out.by_radius.resize(static_cast<std::size_t>(k) + 1);
  const double chi_rho = chi(rho);
  for (int rad = 0; rad <= k; ++rad) {
    std::vector<int> sel;
    for (int i = 0; i < nm; ++i)
      if (mono[static_cast<std::size_t>(i)].radius <= rad) sel.push_back(i);
    const int ns = static_cast<int>(sel.size());
    Eigen::MatrixXd a(ns, ns);
    Eigen::VectorXd b(ns);
    for (int i = 0; i < ns; ++i) {
      b[i] = lin[sel[static_cast<std::size_t>(i)]];
      for (int j = 0; j < ns; ++j)
        a(i, j) = gram(sel[static_cast<std::size_t>(i)],
                       sel[static_cast<std::size_t>(j)]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const double cut = 1e-12 * std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * b;
    double reduction = 0.0;
    int rank = 0;
    bool dropped_signal = false;
    const double bnorm = b.norm();
    for (int i = 0; i < ns; ++i) {
      if (eig.eigenvalues()[i] > cut) {
        reduction += proj[i] * proj[i] / eig.eigenvalues()[i];
        ++rank;
      } else if (std::abs(proj[i]) > 1e-8 * std::max(bnorm, 1e-30)) {
        dropped_signal = true;
      }
    }
    out.by_radius[static_cast<std::size_t>(rad)] = (base - reduction) / chi_rho;
    if (rad == k) {
      out.rank = rank;
      out.ill_conditioned = dropped_signal;
    }
  }
  out.value = out.by_radius.back();
  return out;
}

BlockCheckResult block_orthogonality_check(
    std::shared_ptr<const SpeedChangeModel> model, int n_sites, double rho,
    const std::vector<LocalFunction>& fs, const std::vector<int>& anchors,
    double t, int trajectories, std::uint64_t seed) {
  if (fs.empty() || fs.size() != anchors.size())
    throw Error("block_orthogonality_check: need matching blocks and anchors");
  if (trajectories < 8)
    throw Error("block_orthogonality_check: need at least 8 trajectories");

  // Every block observable must vanish in the mean at every density, so the
  // block integrals are genuine fluctuation functionals.
  for (const LocalFunction& f : fs)
    for (const Rational& p : f.phi_coefficients())
      if (p != 0)
        throw NotMeanZero(
            "block function must have identically zero profile");

  std::vector<bool> taken(static_cast<std::size_t>(n_sites), false);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    for (int s : fs[i].support()) {
      int site = (anchors[i] + s) % n_sites;
      if (site < 0) site += n_sites;
      if (taken[static_cast<std::size_t>(site)])
        throw OverlappingSupports("block supports intersect");
      taken[static_cast<std::size_t>(site)] = true;
    }
  }

  BlockCheckResult out;
  out.kappa0 = fit_kappa0(*model, 10);
  double sum_bound = 0.0;
  for (const LocalFunction& f : fs) {
    const double len = f.window();
    sum_bound += len * len * f.variance(rho);
  }
  out.bound = 18.0 * out.kappa0 * t / model->eps0() * sum_bound;

  const std::size_t nb = fs.size();
  std::vector<double> total(static_cast<std::size_t>(trajectories));
  std::vector<double> per_block_sq(nb, 0.0);
  for (int j = 0; j < trajectories; ++j) {
    RandomSource rng(seed, static_cast<std::uint64_t>(j));
    Configuration cfg = Configuration::bernoulli(n_sites, rho, rng);
    SimulationState st(std::move(cfg), model, std::move(rng));
    std::vector<AdditiveObserver> obs;
    obs.reserve(nb);
    for (std::size_t i = 0; i < nb; ++i)
      obs.emplace_back(fs[i], std::vector<AdditiveObserver::BoxTable>{}, 1.0,
                       anchors[i]);
    std::vector<Observer*> ptrs;
    for (auto& o : obs) ptrs.push_back(&o);
    const EvolveResult ev = evolve(st, {t}, ptrs);
    double s = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      const double y = ev.values[i][0];
      s += y;
      per_block_sq[i] += y * y;
    }
    total[static_cast<std::size_t>(j)] = s;
  }
  out.lhs = jackknife_mean_sq(total);
  double sum_sq = 0.0;
  for (double v : per_block_sq) sum_sq += v / trajectories;
  out.additivity_gap =
      std::abs(out.lhs.value - sum_sq) / std::max(sum_sq, 1e-300);
  out.pass = out.lhs.hi <= out.bound;
  return out;
}

}  // namespace fluctuant
