#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "lagrisk/costs.hpp"
#include "lagrisk/errors.hpp"
#include "test_support.hpp"

using namespace lagrisk;
using lagrisk::testing::fd_gradient;

namespace {

// (Q, Ks, Zv, Zm, L, B) drawn inside the flood-model supports.
std::vector<double> river_point(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {500.0 + 2500.0 * u(gen), 15.0 + 50.0 * u(gen), 49.0 + 2.0 * u(gen),
          54.0 + 2.0 * u(gen),     4990.0 + 20.0 * u(gen), 295.0 + 10.0 * u(gen)};
}

// log-domain transcription of the river cost
double river_log_domain(const std::vector<double>& x) {
  const double lr = std::log(x[0]) - std::log(x[5]) - std::log(x[1]) - 0.5 * (std::log(x[3] - x[2]) - std::log(x[4]));
  return std::exp(0.6 * lr);
}

std::vector<std::pair<CostFunction, std::size_t>> all_costs() {
  return {{CostFunction::squared_sum_surplus(), 3},
          {CostFunction::pairwise_quadratic({0.2, 0.3, 0.5}), 3},
          {CostFunction::coulomb_regularized(), 3},
          {CostFunction::river_overflow(), 6},
          {CostFunction::product(), 3},
          {CostFunction::linear_sum(), 4},
          {CostFunction::sign_flips({false, true, false, true, false, true}, CostFunction::river_overflow()), 6}};
}

}  // namespace

TEST_CASE("cost examples") {
  const std::vector<double> zero_sum{1, -1, 0};
  CHECK(CostFunction::squared_sum_surplus()(zero_sum) == 0.0);
  CHECK(CostFunction::squared_sum_surplus().gradient(zero_sum) == std::vector<double>{0.0, 0.0, 0.0});
  const std::vector<double> same{0, 0};
  CHECK(CostFunction::coulomb_regularized()(same) == 1.0);
  const std::vector<double> half{0.5, 0.5};
  CHECK(CostFunction::product().gradient(half) == std::vector<double>{0.5, 0.5});

  const std::vector<double> table{1013, 30, 50, 55, 5000, 300};
  const double v = CostFunction::river_overflow()(table);
  CHECK(v == doctest::Approx(river_log_domain(table)).epsilon(1e-13));
  CHECK(v == doctest::Approx(2.1419).epsilon(1e-4));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 gen(4);
  for (const auto& [c, d] : all_costs()) {
    CAPTURE(c.name());
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x;
      if (c.dimension() == 6) {
        x = river_point(gen);
        if (c.kind() == CostKind::sign_flips) {
          for (std::size_t j : {1u, 3u, 5u}) x[j] = -x[j];
        }
      } else {
        x = lagrisk::testing::uniform_draws(gen, d, 0.05, 1.0);
      }
      const auto g = c.gradient(x);
      const auto fd = fd_gradient([&](const std::vector<double>& y) { return c(y); }, x, 1e-5);
      const double scale = std::max(lagrisk::testing::max_abs(g), 1e-8);
      CHECK(lagrisk::testing::max_abs_diff(g, fd) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("river cost checks its domain") {
  std::vector<double> x{1013, 30, 56, 55, 5000, 300};
  CHECK_THROWS_AS((void)CostFunction::river_overflow()(x), CostDomainError);
  x = {1013, 30, 50, 55, 5000, 300, 1};
  CHECK_THROWS_AS((void)CostFunction::river_overflow()(x), CostDomainError);
}

TEST_CASE("river cost monotonicity directions") {
  const std::vector<double> x{1013, 30, 50, 55, 5000, 300};
  const auto g = CostFunction::river_overflow().gradient(x);
  CHECK(g[0] > 0.0);  // Q
  CHECK(g[1] < 0.0);  // Ks
  CHECK(g[2] > 0.0);  // Zv
  CHECK(g[3] < 0.0);  // Zm
  CHECK(g[4] > 0.0);  // L
  CHECK(g[5] < 0.0);  // B
  CHECK(river_compatibility_flips() == std::vector<bool>{false, true, false, true, false, true});
}

TEST_CASE("supermodularity of the product cost and the flipped river cost") {
  std::mt19937_64 gen(9);
  const auto product = CostFunction::product();
  const auto flipped = CostFunction::sign_flips(river_compatibility_flips(), CostFunction::river_overflow());
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    {
      const auto x = lagrisk::testing::uniform_draws(gen, 3, 0.0, 1.0);
      const auto y = lagrisk::testing::uniform_draws(gen, 3, 0.0, 1.0);
      std::vector<double> lo(3), hi(3);
      for (int j = 0; j < 3; ++j) {
        lo[j] = std::min(x[j], y[j]);
        hi[j] = std::max(x[j], y[j]);
      }
      if (product(lo) + product(hi) < product(x) + product(y) - 1e-12) ++violations;
    }
    {
      auto x = river_point(gen), y = river_point(gen);
      for (std::size_t j : {1u, 3u, 5u}) {
        x[j] = -x[j];
        y[j] = -y[j];
      }
      std::vector<double> lo(6), hi(6);
      for (int j = 0; j < 6; ++j) {
        lo[j] = std::min(x[j], y[j]);
        hi[j] = std::max(x[j], y[j]);
      }
      if (flipped(lo) + flipped(hi) < flipped(x) + flipped(y) - 1e-12) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("symmetric costs are invariant under coordinate permutation") {
  std::mt19937_64 gen(6);
  for (const auto& c : {CostFunction::coulomb_regularized(), CostFunction::squared_sum_surplus()}) {
    for (int trial = 0; trial < 100; ++trial) {
      auto x = lagrisk::testing::uniform_draws(gen, 4, -1.0, 1.0);
      const double v = c(x);
      std::sort(x.begin(), x.end());
      do {
        CHECK(c(x) == doctest::Approx(v).epsilon(1e-15));
      } while (std::next_permutation(x.begin(), x.end()));
    }
  }
}

TEST_CASE("Jensen lower bound on random clouds") {
  std::mt19937_64 gen(8);
  const auto c = CostFunction::squared_sum_surplus();
  for (int trial = 0; trial < 50; ++trial) {
    double mean_sq = 0.0, mean_sum = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      const auto x = lagrisk::testing::uniform_draws(gen, 3, -1.0, 2.0);
      mean_sq += -c(x) / n;
      mean_sum += (x[0] + x[1] + x[2]) / n;
    }
    CHECK(mean_sq >= mean_sum * mean_sum);
  }
}

TEST_CASE("pairwise quadratic weights are validated") {
  CHECK_THROWS_AS(CostFunction::pairwise_quadratic({0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(CostFunction::pairwise_quadratic({-0.5, 1.5}), DomainError);
  const std::vector<double> x{0.0, 1.0};
  // sum_{j,k} w_j w_k |x_j - x_k|^2 = 2 * 0.25 * 1
  CHECK(CostFunction::pairwise_quadratic({0.5, 0.5})(x) == doctest::Approx(0.5));
}
