#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lagrisk/costs.hpp"
#include "lagrisk/measures1d.hpp"
#include "lagrisk/solver.hpp"
#include "lagrisk/spectral.hpp"

namespace lagrisk {

enum class Placement { midpoint, barycenter };

/// y_{i,j} = F_j^{-1}((i - 1/2)/N), or F_j^{-1}(1 - (i - 1/2)/N) on flipped axes.
/// With Placement::barycenter the atoms sit at the quantile-block barycenters.
[[nodiscard]] ParticleCloud comonotone_points(std::span<const Density1D> marginals, std::size_t n,
                                              const std::vector<bool>& flips = {},
                                              Placement placement = Placement::midpoint);

/// \int_0^1 c(Q_1(t), ..., Q_D(t)) alpha(t) dt along the comonotone (or
/// flip-reversed) coupling.
[[nodiscard]] double reference_value(const CostFunction& c, const SpectralFunction& alpha,
                                     std::span<const Density1D> marginals, const std::vector<bool>& flips = {});

struct QuantizerResult {
  std::vector<double> atoms;
  double error = 0.0;  ///< e_{2,N}
  std::vector<Interval> blocks;
};

/// Uniform N-point quantization with atoms at quantile-block barycenters.
[[nodiscard]] QuantizerResult quantize_1d(const Density1D& rho, std::size_t n);

enum class Side { left, right };

/// Quantization of the normalized restriction of rho to quantile levels
/// (0, m) (left) or (1 - m, 1) (right).
[[nodiscard]] QuantizerResult restriction_quantization(const Density1D& rho, double m, std::size_t n,
                                                       Side side = Side::left);

/// W_2(gamma_N, delta_Y)^2 of the glued block coupling, equal to
/// sum_j W_2(rho_j, delta_{Y_j})^2.
[[nodiscard]] double block_approximation_cost(const ParticleCloud& cloud, std::span<const Density1D> marginals);

struct BruteForceResult {
  double value = 0.0;
  /// assignment[j][i]: atom of list j paired with atom i of list 0 (assignment[0] is the identity).
  std::vector<std::vector<std::size_t>> assignment;
};

/// Exhaustive maximum of R_alpha over uniform couplings of D atom lists.
/// Limited to N <= 6, D <= 3.
[[nodiscard]] BruteForceResult brute_force_mmot(const std::vector<std::vector<double>>& atoms, const CostFunction& c,
                                                const SpectralFunction& alpha);

/// W_{2,max}(rho, m delta_Z)^2 by min-cost flow between M equal-mass atoms of rho
/// and the atoms of Z, each target holding m/N.
[[nodiscard]] double flow_partial_ot_oracle(const Density1D& rho, std::span<const double> z, double m,
                                            std::size_t atom_count = 2000);

struct RateFit {
  std::vector<double> ns;
  std::vector<double> errors;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares fit of log(error) against log(N).
[[nodiscard]] RateFit fit_rate(std::span<const double> ns, std::span<const double> errors);

}  // namespace lagrisk
