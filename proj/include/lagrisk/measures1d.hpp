#pragma once

#include <memory>
#include <string_view>
#include <utility>
#include <vector>

namespace lagrisk {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Moments of a density restricted to an interval, taken about `center`:
/// m_k = \int_{[l,r]} (x - center)^k d rho(x).
struct CenteredMoments {
  double center = 0.0;
  double m0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;

  [[nodiscard]] double barycenter() const { return m0 > 0.0 ? center + m1 / m0 : center; }

  /// \int (x - z)^2 d rho over the interval, expanded about `center` so that
  /// no large absolute coordinates enter the subtraction.
  [[nodiscard]] double cost_to(double z) const {
    const double d = z - center;
    return m2 - 2.0 * d * m1 + d * d * m0;
  }
};

enum class Family {
  uniform,
  triangular,
  truncated_gumbel,
  truncated_normal,
  wigner_semicircle,
  power_law,
  mixture,
};

namespace detail {
class DensityModel;
}

/// Analytic univariate probability density. Immutable value type; copies share
/// the underlying model, so instances are cheap to pass around and safe to use
/// concurrently.
class Density1D {
 public:
  static Density1D uniform(double a, double b);
  /// Triangular law with support [a, b] and mode c.
  static Density1D triangular(double a, double c, double b);
  /// Gumbel(location, scale) conditioned on [lo, hi].
  static Density1D truncated_gumbel(double location, double scale, double lo, double hi);
  /// Normal(mean, std) conditioned on [lo, hi]. An infinite `hi` is replaced by
  /// the finite sentinel mean + 12 std (neglected mass < 1e-30).
  static Density1D truncated_normal(double mean, double std, double lo, double hi);
  static Density1D wigner_semicircle(double center, double radius);
  /// Density a x^(a-1) on [0, 1].
  static Density1D power_law(double a);
  /// Convex combination; weights must be positive and are normalized to one.
  static Density1D mixture(std::vector<std::pair<double, Density1D>> parts);

  [[nodiscard]] Family family() const;
  [[nodiscard]] std::string_view family_name() const;
  /// Constructor parameters in declaration order (empty for mixtures).
  [[nodiscard]] std::vector<double> parameters() const;
  /// Mixture components; empty for the other families.
  [[nodiscard]] const std::vector<std::pair<double, Density1D>>& components() const;

  [[nodiscard]] Interval support() const;
  /// Points where the density is not smooth (support ends, modes, joins).
  [[nodiscard]] std::vector<double> kinks() const;

  [[nodiscard]] double pdf(double x) const;
  [[nodiscard]] double cdf(double x) const;
  /// Inverse cdf; throws DomainError unless 0 < t < 1.
  [[nodiscard]] double quantile(double t) const;
  /// Generalized inverse on the closed range [0, 1]; 0 and 1 map to the
  /// support endpoints. Levels are clamped into [0, 1].
  [[nodiscard]] double quantile_clamped(double t) const;

  /// rho([l, r]).
  [[nodiscard]] double mass(double l, double r) const;
  /// \int_{[l,r] \cap support} x^k d rho for k in {0, 1, 2}.
  [[nodiscard]] double interval_moment(double l, double r, int k) const;
  [[nodiscard]] CenteredMoments centered_moments(double l, double r, double center) const;

  [[nodiscard]] double mean() const;

 private:
  explicit Density1D(std::shared_ptr<const detail::DensityModel> model);
  std::shared_ptr<const detail::DensityModel> model_;
};

}  // namespace lagrisk
