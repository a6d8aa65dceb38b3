#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lagrisk/errors.hpp"
#include "lagrisk/measures1d.hpp"
#include "test_support.hpp"

using namespace lagrisk;
using lagrisk::testing::simpson;

namespace {

std::vector<Density1D> all_families() {
  return {
      Density1D::uniform(0.0, 2.0),
      Density1D::triangular(0.0, 1.0, 2.0),
      Density1D::truncated_gumbel(1013.0, 558.0, 500.0, 3000.0),
      Density1D::truncated_normal(30.0, 8.0, 15.0, std::numeric_limits<double>::infinity()),
      Density1D::wigner_semicircle(0.0, 1.0),
      Density1D::power_law(2.0),
      Density1D::mixture({{0.5, Density1D::triangular(0.0, 1.0, 2.0)}, {0.5, Density1D::triangular(3.0, 4.0, 5.0)}}),
  };
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("cdf examples") {
  CHECK(Density1D::uniform(0, 1).cdf(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(Density1D::triangular(0, 1, 2).cdf(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(Density1D::wigner_semicircle(0, 1).cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("quantile examples") {
  CHECK(Density1D::uniform(0, 2).quantile(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(Density1D::triangular(0, 1, 2).quantile(0.125) == doctest::Approx(0.5).epsilon(1e-13));

  // median of N(30, 8) conditioned on [15, inf) by bisection on the raw normal cdf
  const auto tn = Density1D::truncated_normal(30, 8, 15, std::numeric_limits<double>::infinity());
  const double a = normal_cdf((15.0 - 30.0) / 8.0);
  double lo = 15.0, hi = 130.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((normal_cdf((mid - 30.0) / 8.0) - a) / (1.0 - a) < 0.5 ? lo : hi) = mid;
  }
  const double q = tn.quantile(0.5);
  CHECK(q == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
  CHECK(q == doctest::Approx(30.30).epsilon(1e-3));
  CHECK(std::abs(tn.cdf(q) - 0.5) <= 1e-10);
}

TEST_CASE("quantile rejects levels outside (0, 1)") {
  const auto u = Density1D::uniform(0, 1);
  CHECK_THROWS_AS((void)u.quantile(0.0), DomainError);
  CHECK_THROWS_AS((void)u.quantile(1.0), DomainError);
  CHECK_THROWS_AS((void)u.quantile(-0.1), DomainError);
  CHECK(u.quantile_clamped(0.0) == 0.0);
  CHECK(u.quantile_clamped(1.0) == 1.0);
}

TEST_CASE("invalid parameters are rejected at construction") {
  CHECK_THROWS_AS(Density1D::uniform(1, 1), DomainError);
  CHECK_THROWS_AS(Density1D::triangular(0, 3, 2), DomainError);
  CHECK_THROWS_AS(Density1D::truncated_normal(0, 0, -1, 1), DomainError);
  CHECK_THROWS_AS(Density1D::wigner_semicircle(0, 0), DomainError);
  CHECK_THROWS_AS(Density1D::power_law(0), DomainError);
  CHECK_THROWS_AS(Density1D::truncated_gumbel(0, -1, 0, 1), DomainError);
  CHECK_THROWS_AS(Density1D::mixture({}), DomainError);
}

TEST_CASE("interval moment examples") {
  const auto u = Density1D::uniform(0, 1);
  CHECK(u.interval_moment(0, 0.5, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(u.interval_moment(0, 0.5, 1) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(u.interval_moment(0, 1, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(u.interval_moment(2, 3, 1) == 0.0);
}

TEST_CASE("total mass is one and cdf runs from 0 to 1") {
  for (const auto& rho : all_families()) {
    CAPTURE(rho.family_name());
    const Interval s = rho.support();
    CHECK(std::abs(rho.interval_moment(s.lo, s.hi, 0) - 1.0) <= 1e-12);
    CHECK(rho.cdf(s.lo) == 0.0);
    CHECK(rho.cdf(s.hi) == 1.0);
  }
}

TEST_CASE("interval moments match an independent Simpson quadrature") {
  std::mt19937_64 gen(7);
  for (const auto& rho : all_families()) {
    CAPTURE(rho.family_name());
    const Interval s = rho.support();
    std::uniform_real_distribution<double> u(s.lo, s.hi);
    for (int trial = 0; trial < 5; ++trial) {
      double l = u(gen), r = u(gen);
      if (l > r) std::swap(l, r);
      // split at the kinks so Simpson sees smooth pieces
      std::vector<double> pts{l};
      for (double k : rho.kinks()) {
        if (k > l && k < r) pts.push_back(k);
      }
      pts.push_back(r);
      for (int k = 0; k <= 2; ++k) {
        double oracle = 0.0;
        for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
          oracle += simpson([&](double x) { return std::pow(x, k) * rho.pdf(x); }, pts[p], pts[p + 1], 1e-15);
        }
        const double scale = std::max(std::pow(std::max(std::abs(l), std::abs(r)), k), 1.0);
        CHECK(std::abs(rho.interval_moment(l, r, k) - oracle) <= 1e-10 * scale);
      }
    }
  }
}

TEST_CASE("interval moments are additive") {
  std::mt19937_64 gen(11);
  for (const auto& rho : all_families()) {
    CAPTURE(rho.family_name());
    const Interval s = rho.support();
    std::uniform_real_distribution<double> u(s.lo, s.hi);
    for (int trial = 0; trial < 20; ++trial) {
      double pts[3] = {u(gen), u(gen), u(gen)};
      std::sort(pts, pts + 3);
      for (int k = 0; k <= 2; ++k) {
        const double whole = rho.interval_moment(pts[0], pts[2], k);
        const double parts = rho.interval_moment(pts[0], pts[1], k) + rho.interval_moment(pts[1], pts[2], k);
        const double scale = std::max(std::pow(std::max(std::abs(pts[0]), std::abs(pts[2])), k), 1.0);
        CHECK(std::abs(whole - parts) <= 1e-12 * scale);
      }
    }
  }
}

TEST_CASE("cdf derivative matches the density away from kinks") {
  std::mt19937_64 gen(3);
  for (const auto& rho : all_families()) {
    CAPTURE(rho.family_name());
    const Interval s = rho.support();
    const double h = 1e-6 * s.width();
    std::uniform_real_distribution<double> u(s.lo, s.hi);
    const auto kinks = rho.kinks();
    int checked = 0;
    while (checked < 1000) {
      const double x = u(gen);
      bool near = false;
      for (double k : kinks) near = near || std::abs(x - k) < 10.0 * h;
      if (near) continue;
      ++checked;
      const double numeric = (rho.cdf(x + h) - rho.cdf(x - h)) / (2.0 * h);
      const double f = rho.pdf(x);
      // scale-free check: compare in units of the support width
      CHECK(std::abs(numeric - f) * s.width() <= 1e-6 * (1.0 + f * s.width()));
    }
  }
}

TEST_CASE("quantile inverts the cdf") {
  std::mt19937_64 gen(5);
  for (const auto& rho : all_families()) {
    CAPTURE(rho.family_name());
    if (rho.family() == Family::mixture) continue;  // disconnected support
    const Interval s = rho.support();
    std::uniform_real_distribution<double> u(s.lo, s.hi);
    for (int i = 0; i < 200; ++i) {
      const double x = u(gen);
      const double t = rho.cdf(x);
      if (t <= 1e-12 || t >= 1.0 - 1e-12) continue;
      // rounding of t near 1 moves the exact inverse by about eps / pdf(x)
      const double conditioning = 4.0 * std::numeric_limits<double>::epsilon() / rho.pdf(x);
      CHECK(std::abs(rho.quantile(t) - x) <= 1e-9 * std::max(1.0, std::abs(x)) + conditioning);
    }
    for (int i = 1; i < 100; ++i) {
      const double t = i / 100.0;
      CHECK(std::abs(rho.cdf(rho.quantile(t)) - t) <= 1e-10);
    }
  }
}

TEST_CASE("cdf is nondecreasing") {
  for (const auto& rho : all_families()) {
    CAPTURE(rho.family_name());
    const Interval s = rho.support();
    double prev = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double v = rho.cdf(s.lo + s.width() * i / 2000.0);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("mixture cdf is the weighted sum of component cdfs") {
  const auto a = Density1D::triangular(0, 1, 2);
  const auto b = Density1D::uniform(1.5, 4);
  const auto mix = Density1D::mixture({{1.0, a}, {3.0, b}});
  for (int i = 0; i <= 100; ++i) {
    const double x = -0.5 + 5.0 * i / 100.0;
    CHECK(mix.cdf(x) == doctest::Approx(0.25 * a.cdf(x) + 0.75 * b.cdf(x)).epsilon(1e-15));
  }
  // quantile across the flat part between two separated components
  const auto gap = Density1D::mixture({{0.5, Density1D::uniform(0, 1)}, {0.5, Density1D::uniform(2, 3)}});
  CHECK(gap.quantile(0.25) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(gap.quantile(0.75) == doctest::Approx(2.5).epsilon(1e-10));
}

TEST_CASE("truncated normal keeps a finite sentinel bound") {
  const auto tn = Density1D::truncated_normal(30, 8, 15, std::numeric_limits<double>::infinity());
  CHECK(tn.support().hi == doctest::Approx(30 + 12 * 8));
  CHECK(std::isinf(tn.parameters()[3]));
}

TEST_CASE("moments far from the origin keep full accuracy on narrow blocks") {
  const auto tn = Density1D::truncated_normal(30, 8, 15, std::numeric_limits<double>::infinity());
  const double l = 30.0, r = 30.01;
  const CenteredMoments cm = tn.centered_moments(l, r, 0.5 * (l + r));
  const double oracle_var = simpson([&](double x) { return (x - cm.barycenter()) * (x - cm.barycenter()) * tn.pdf(x); },
                                    l, r, 1e-22);
  CHECK(cm.cost_to(cm.barycenter()) == doctest::Approx(oracle_var).epsilon(1e-8));
}
