#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace lagrisk {

enum class SpectralKind { constant, cvar, linear, quadratic_offset, piecewise_constant };

/// Spectral function alpha: (0,1) -> [0, inf), nondecreasing, integral one.
/// The risk measure R_alpha(mu) = \int_0^1 F_mu^{-1}(t) alpha(t) dt.
class SpectralFunction {
 public:
  /// alpha = 1 (the mean).
  static SpectralFunction constant();
  /// alpha = m^{-1} 1_{(1-m, 1)}, m in (0, 1].
  static SpectralFunction cvar(double m);
  /// alpha(t) = 2t.
  static SpectralFunction linear();
  /// alpha(t) = ((t + eta)^2 - eta^2) / (1/3 + eta), eta > 0.
  static SpectralFunction quadratic_offset(double eta = 0.1);
  /// Step function: `values[k]` on (breakpoints[k], breakpoints[k+1]).
  /// Breakpoints start at 0 and end at 1.
  static SpectralFunction piecewise_constant(std::vector<double> breakpoints, std::vector<double> values);

  [[nodiscard]] SpectralKind kind() const { return kind_; }
  [[nodiscard]] std::string_view name() const;
  /// CVaR mass (1 for the other variants).
  [[nodiscard]] double mass() const { return kind_ == SpectralKind::cvar ? param_ : 1.0; }
  [[nodiscard]] double eta() const { return param_; }
  [[nodiscard]] const std::vector<double>& breakpoints() const { return breaks_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  [[nodiscard]] double operator()(double t) const;
  /// A(t) = \int_0^t alpha.
  [[nodiscard]] double cumulative(double t) const;
  /// Jump locations of alpha inside (0, 1).
  [[nodiscard]] std::vector<double> discontinuities() const;

 private:
  SpectralFunction(SpectralKind kind, double param) : kind_(kind), param_(param) {}

  SpectralKind kind_;
  double param_ = 0.0;
  std::vector<double> breaks_;
  std::vector<double> values_;
};

/// p_i = \int_{((i-1)/N, i/N)} alpha, nondecreasing, summing to one.
struct BinWeights {
  std::vector<double> p;

  [[nodiscard]] std::size_t size() const { return p.size(); }
};

[[nodiscard]] BinWeights bin_weights(const SpectralFunction& alpha, std::size_t n);

struct RiskEvaluation {
  double value = 0.0;
  /// Weight received by each input value (an element of the subdifferential at ties).
  std::vector<double> weights;
};

/// R_alpha of the empirical measure of `values`: the k-th smallest value gets
/// p_k, ties broken by original index.
[[nodiscard]] RiskEvaluation risk_value_and_weights(const SpectralFunction& alpha, std::span<const double> values);
[[nodiscard]] RiskEvaluation risk_value_and_weights(const BinWeights& bins, std::span<const double> values);

}  // namespace lagrisk
