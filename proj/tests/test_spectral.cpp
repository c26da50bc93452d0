#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fluctuant/dynamics.hpp"
#include "fluctuant/errors.hpp"
#include "fluctuant/local_function.hpp"
#include "fluctuant/rng.hpp"
#include "fluctuant/spectral.hpp"

using namespace fluctuant;

namespace {

// Independent <f, -L f> on the segment [1, ell] under the product measure:
// rates come straight off the window table with zero extension beyond the
// segment, bypassing the sector machinery entirely.
double quad_form_segment(const SpeedChangeModel& model, const LocalFunction& f,
                         int ell, double rho) {
  const int radius = model.radius();
  const int tb = 2 * radius + 2;
  double acc = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << ell); ++bits) {
    const int pop = std::popcount(bits);
    const double w = std::pow(rho, pop) * std::pow(1.0 - rho, ell - pop);
    double sum = 0.0;
    for (int x = 1; x <= ell - 1; ++x) {
      std::uint64_t idx = 0;
      for (int i = 0; i < tb; ++i) {
        const int s = x - radius + i;
        if (s >= 1 && s <= ell && ((bits >> (s - 1)) & 1u))
          idx |= std::uint64_t{1} << i;
      }
      const std::uint64_t pair =
          (std::uint64_t{1} << (x - 1)) | (std::uint64_t{1} << x);
      const std::uint64_t hit = bits & pair;
      if (hit == 0 || hit == pair) continue;  // swap is a no-op
      const double df = f.eval_bits(bits ^ pair) - f.eval_bits(bits);
      sum += model.table()[static_cast<std::size_t>(idx)] * df * df;
    }
    acc += 0.5 * w * sum;
  }
  return acc;
}

double uniform_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s / static_cast<double>(a.size());
}

std::vector<double> apply_minus_sym(const std::vector<std::vector<double>>& g,
                                    const std::vector<double>& v) {
  const std::size_t m = g.size();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out[i] -= 0.5 * (g[i][j] + g[j][i]) * v[j];
  return out;
}

}  // namespace

TEST_CASE("sector enumeration is sorted and complete") {
  const Sector sec = make_sector(Geometry::Ring, 4, 2);
  CHECK(sec.states == std::vector<std::uint64_t>{3, 5, 6, 9, 10, 12});
  for (std::size_t i = 0; i < sec.states.size(); ++i)
    CHECK(sec.index_of(sec.states[i]) == static_cast<int>(i));
  CHECK(sec.index_of(7) == -1);

  CHECK(make_sector(Geometry::Interval, 5, 0).states ==
        std::vector<std::uint64_t>{0});
  CHECK(make_sector(Geometry::Interval, 5, 5).states ==
        std::vector<std::uint64_t>{31});
  CHECK(make_sector(Geometry::Ring, 10, 4).states.size() == 210);
}

TEST_CASE("ring generator has conservative rows and the right transitions") {
  const auto model = SpeedChangeModel::constant_rate(1.0);
  const Sector sec = make_sector(Geometry::Ring, 4, 2);
  const auto g = generator_matrix(*model, sec);
  for (std::size_t s = 0; s < g.size(); ++s) {
    double row = 0.0;
    for (double v : g[s]) row += v;
    CHECK(row == doctest::Approx(0.0).epsilon(1e-14));
  }
  // State {0,1} (mask 3) exchanges across bonds (1,2) and (3,0) only:
  // targets {0,2} (mask 5) and {1,3} (mask 10).
  const int s3 = sec.index_of(3);
  CHECK(g[s3][static_cast<std::size_t>(sec.index_of(5))] ==
        doctest::Approx(1.0));
  CHECK(g[s3][static_cast<std::size_t>(sec.index_of(10))] ==
        doctest::Approx(1.0));
  CHECK(g[s3][static_cast<std::size_t>(sec.index_of(6))] == 0.0);
  CHECK(g[s3][static_cast<std::size_t>(s3)] == doctest::Approx(-2.0));
}

TEST_CASE("segment gaps: exact small cases and the path spectrum") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  CHECK(spectral_gap(*ssep, make_sector(Geometry::Interval, 2, 1)) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(spectral_gap(*ssep, make_sector(Geometry::Interval, 3, 1)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  const auto spec =
      symmetrized_spectrum(*ssep, make_sector(Geometry::Interval, 3, 1));
  REQUIRE(spec.size() == 3);
  CHECK(spec[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(spec[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spec[2] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("segment gap is independent of the particle number at unit rate") {
  // Exchange at constant rate has one relaxation rate per segment length:
  // every sector of the same segment shares it.
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  for (int ell : {4, 6}) {
    const double ref =
        spectral_gap(*ssep, make_sector(Geometry::Interval, ell, 1));
    CHECK(ref == doctest::Approx(2.0 * (1.0 - std::cos(M_PI / ell)))
                     .epsilon(1e-10));
    for (int k = 2; k < ell; ++k)
      CHECK(spectral_gap(*ssep, make_sector(Geometry::Interval, ell, k)) ==
            doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("gap times ell^2 stays in a narrow band") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  double lo = 1e300, hi = 0.0;
  for (int ell = 2; ell <= 10; ++ell) {
    for (int k = 1; k < ell; ++k) {
      const double gap =
          spectral_gap(*ssep, make_sector(Geometry::Interval, ell, k));
      const double v = gap * ell * ell;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  CHECK(lo == doctest::Approx(8.0).epsilon(1e-10));  // attained at ell = 2
  CHECK(hi / lo < 3.0);
}

TEST_CASE("ellipticity transfers to the gap") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  const auto model = SpeedChangeModel::nearest_kind(1.0);  // eps0 = 1/3
  const double eps0 = model->eps0();
  for (int ell : {4, 5}) {
    for (int k = 1; k < ell; ++k) {
      const Sector sec = make_sector(Geometry::Interval, ell, k);
      const double ref = spectral_gap(*ssep, sec);
      const double gap = spectral_gap(*model, sec);
      CHECK(gap >= eps0 * ref - 1e-12);
      CHECK(gap <= ref / eps0 + 1e-12);
    }
  }
}

TEST_CASE("iterative gap matches the dense solve") {
  const auto model = SpeedChangeModel::nearest_kind(0.5);
  const Sector sec = make_sector(Geometry::Ring, 12, 6);  // 924 states
  const double dense = spectral_gap(*model, sec);
  const double iter = spectral_gap(*model, sec, /*dense_limit=*/50);
  CHECK(iter == doctest::Approx(dense).epsilon(1e-7));
}

TEST_CASE("degenerate sectors are rejected") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  CHECK_THROWS_AS(spectral_gap(*ssep, make_sector(Geometry::Interval, 4, 0)),
                  DisconnectedSector);
  CHECK_THROWS_AS(spectral_gap(*ssep, make_sector(Geometry::Interval, 4, 4)),
                  DisconnectedSector);
}

TEST_CASE("fit_kappa0 at unit rate comes from the shortest segment") {
  // gap * ell^2 is smallest at ell = 2 (value 8), so kappa0 = 1/8.
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  CHECK(fit_kappa0(*ssep, 6) == doctest::Approx(0.125).epsilon(1e-10));
}

TEST_CASE("dirichlet form: pinned value and quadratic-form identity") {
  const LocalFunction f({{{1}, 1.0}});  // eta(1)
  CHECK(dirichlet_form(f, 2, 0.5) == doctest::Approx(0.5).epsilon(1e-15));

  // At unit exchange rate <f, -L f> is exactly half the form; with a
  // nonconstant rate it is sandwiched by the ellipticity constants.
  RandomSource rng(99, 4);
  std::vector<std::pair<std::vector<int>, double>> terms;
  for (int i = 0; i < 5; ++i) {
    std::vector<int> sites;
    for (int s = 1; s <= 5; ++s)
      if (rng.u01() < 0.4) sites.push_back(s);
    terms.push_back({sites, rng.normal()});
  }
  const LocalFunction g(terms);
  const int ell = 5;
  const double rho = 0.3;
  const double form = dirichlet_form(g, ell, rho);
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  CHECK(quad_form_segment(*ssep, g, ell, rho) ==
        doctest::Approx(0.5 * form).epsilon(1e-12));
  const auto model = SpeedChangeModel::nearest_kind(1.0);
  const double q = quad_form_segment(*model, g, ell, rho);
  CHECK(q >= model->eps0() * 0.5 * form - 1e-12);
  CHECK(q <= 0.5 * form / model->eps0() + 1e-12);
}

TEST_CASE("h_minus_one: pinned quarter, solution vector, variational bound") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  const Sector sec = make_sector(Geometry::Ring, 4, 2);
  const LocalFunction f({{{1}, 1.0}, {{2}, -1.0}});  // eta(1) - eta(2)
  const double h_sq = h_minus_one_sq(*ssep, sec, f, 0);
  CHECK(h_sq == doctest::Approx(0.25).epsilon(1e-12));

  // Hand-solved potential u for -S u = f, in sorted state order
  // {3, 5, 6, 9, 10, 12}; <f, u> under the uniform measure is the norm.
  const std::vector<double> u{0.5, -0.25, 0.0, 0.0, 0.25, -0.5};
  std::vector<double> fv;
  for (const std::uint64_t state : sec.states)
    fv.push_back(static_cast<double>((state >> 1) & 1u) -
                 static_cast<double>((state >> 2) & 1u));
  const auto g = generator_matrix(*ssep, sec);
  const std::vector<double> su = apply_minus_sym(g, u);
  for (std::size_t i = 0; i < u.size(); ++i)
    CHECK(su[i] == doctest::Approx(fv[i]).epsilon(1e-13));
  CHECK(uniform_dot(fv, u) == doctest::Approx(0.25).epsilon(1e-15));

  // Variational characterization: 2<f,g> - <g,-Sg> never exceeds the norm.
  RandomSource rng(5, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> gv(u.size());
    for (auto& v : gv) v = rng.normal() * (trial % 7 ? 1.0 : 10.0);
    const double q =
        2.0 * uniform_dot(fv, gv) - uniform_dot(gv, apply_minus_sym(g, gv));
    CHECK(q <= h_sq + 1e-8);
  }

  CHECK_THROWS_AS(h_minus_one_sq(*ssep, sec, LocalFunction({{{1}, 1.0}}), 0),
                  NotMeanZero);
}

TEST_CASE("h_minus_one respects the gap bound on random observables") {
  const auto model = SpeedChangeModel::nearest_kind(0.5);
  RandomSource rng(31, 0);
  for (int sites : {6, 8}) {
    const Sector sec = make_sector(Geometry::Ring, sites, sites / 2);
    const double gap = spectral_gap(*model, sec);
    const std::size_t m = sec.states.size();
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> fv(m);
      double mean = 0.0;
      for (auto& v : fv) {
        v = rng.normal();
        mean += v;
      }
      mean /= static_cast<double>(m);
      for (auto& v : fv) v -= mean;
      double var = 0.0;
      for (double v : fv) var += v * v;
      var /= static_cast<double>(m);
      const double h_sq =
          h_minus_one_sq(*model, sec, [&](std::uint64_t state) {
            return fv[static_cast<std::size_t>(sec.index_of(state))];
          });
      CHECK(h_sq <= var / gap + 1e-9);
      CHECK(h_sq >= 0.0);
    }
  }
}

TEST_CASE("kv_check: bound holds and the rate stabilizes") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  const LocalFunction f({{{1}, 1.0}, {{2}, -1.0}});
  const KvResult kv =
      kv_check(ssep, 4, 2, f, {1.0, 5.0, 25.0}, 2000, 0xfeed);
  CHECK(kv.h_sq == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(kv.bound[0] == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(kv.bound[2] == doctest::Approx(112.5).epsilon(1e-12));
  CHECK(kv.pass);
  CHECK(kv.lhs[0].value < kv.lhs[1].value);
  CHECK(kv.lhs[1].value < kv.lhs[2].value);
  // E[(int f)^2] / t approaches twice the squared norm from below.
  CHECK(kv.ratio[2] > 0.3);
  CHECK(kv.ratio[2] < 0.6);
}

TEST_CASE("variational diffusion: unit exchange gives exactly 2") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  for (int k : {0, 1, 3}) {
    const DiffusionResult d = variational_diffusion(*ssep, 0.5, k);
    CHECK(d.value == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(d.by_radius.size() == static_cast<std::size_t>(k) + 1);
    for (double v : d.by_radius)
      CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_FALSE(d.ill_conditioned);
  }
}

TEST_CASE("variational diffusion: radius zero has a closed form") {
  // The radius-0 basis cannot move the minimum (its gradient sums are
  // swap-invariant), so the value is E[r; discordant] / chi. For the
  // nearest-kind rate this is (1 + 2 b rho) * 2.
  const auto model = SpeedChangeModel::nearest_kind(1.0);
  const double rho = 0.3;
  const DiffusionResult d = variational_diffusion(*model, rho, 2);
  CHECK(d.by_radius[0] ==
        doctest::Approx((1.0 + 2.0 * rho) * 2.0).epsilon(1e-12));
  CHECK(d.by_radius[1] <= d.by_radius[0] + 1e-12);
  CHECK(d.by_radius[2] <= d.by_radius[1] + 1e-12);
  CHECK(d.value > 0.0);
  CHECK(d.rank > 0);
}

TEST_CASE("variational diffusion rejects oversized bases") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  CHECK_THROWS_AS(variational_diffusion(*ssep, 0.5, 6), Error);
}

TEST_CASE("block orthogonality: disjoint blocks pass the fitted bound") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  const LocalFunction f1({{{1}, 1.0}, {{2}, -1.0}});  // eta(1) - eta(2)
  const LocalFunction f2({{{1}, 1.0}, {{3}, -1.0}});  // eta(1) - eta(3)
  const BlockCheckResult r = block_orthogonality_check(
      ssep, 32, 0.5, {f1, f2}, {0, 10}, 1.0, 400, 0xb10c);
  CHECK(r.kappa0 == doctest::Approx(0.125).epsilon(1e-10));
  CHECK(r.bound == doctest::Approx(18.0 * 0.125 * (4.0 * 0.5 + 9.0 * 0.5))
                       .epsilon(1e-10));
  CHECK(r.pass);
  CHECK(r.additivity_gap < 0.3);
}

TEST_CASE("block orthogonality rejects bad inputs") {
  const auto ssep = SpeedChangeModel::constant_rate(1.0);
  const LocalFunction grad({{{1}, 1.0}, {{2}, -1.0}});
  const LocalFunction biased({{{1}, 1.0}});  // profile beta, not zero
  CHECK_THROWS_AS(block_orthogonality_check(ssep, 32, 0.5, {grad, biased},
                                            {0, 10}, 1.0, 16, 1),
                  NotMeanZero);
  CHECK_THROWS_AS(block_orthogonality_check(ssep, 32, 0.5, {grad, grad},
                                            {0, 1}, 1.0, 16, 1),
                  OverlappingSupports);
  // Wrapped anchors collide too: support of the second block lands on the
  // first across the seam.
  CHECK_THROWS_AS(block_orthogonality_check(ssep, 32, 0.5, {grad, grad},
                                            {0, 31}, 1.0, 16, 1),
                  OverlappingSupports);
}
