#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace lagrisk {

enum class CostKind {
  squared_sum_surplus,  ///< -|x_1 + ... + x_D|^2
  pairwise_quadratic,   ///< sum_{j,k} w_j w_k |x_j - x_k|^2
  coulomb_regularized,  ///< sum_{j<k} 1 / (1 + |x_j - x_k|)
  river_overflow,       ///< (Q / (B Ks sqrt((Zm - Zv) / L)))^0.6
  product,              ///< prod_j x_j
  linear_sum,           ///< sum_j x_j
  sign_flips,           ///< inner(s * x) with s_j = -1 on masked axes
};

/// Cost c: R^D -> R with analytic gradient. Immutable, thread-safe value type.
class CostFunction {
 public:
  static CostFunction squared_sum_surplus();
  static CostFunction pairwise_quadratic(std::vector<double> weights);
  static CostFunction coulomb_regularized();
  /// Arguments ordered (Q, Ks, Zv, Zm, L, B).
  static CostFunction river_overflow();
  static CostFunction product();
  static CostFunction linear_sum();
  static CostFunction sign_flips(std::vector<bool> mask, CostFunction inner);

  [[nodiscard]] CostKind kind() const;
  [[nodiscard]] std::string_view name() const;
  /// Required dimension, or 0 when any D >= 1 is accepted.
  [[nodiscard]] std::size_t dimension() const;
  [[nodiscard]] const std::vector<double>& weights() const;
  [[nodiscard]] const std::vector<bool>& mask() const;
  [[nodiscard]] const CostFunction* inner() const;

  /// Throws CostDomainError outside the domain.
  [[nodiscard]] double operator()(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> g) const;
  [[nodiscard]] std::vector<double> gradient(std::span<const double> x) const;

  struct Impl;

 private:
  explicit CostFunction(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

/// Per-axis signs under which the river cost becomes supermodular: Ks, Zm and
/// B enter with negative sign.
[[nodiscard]] std::vector<bool> river_compatibility_flips();

}  // namespace lagrisk
