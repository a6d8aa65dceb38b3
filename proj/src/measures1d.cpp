#include "lagrisk/measures1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "lagrisk/errors.hpp"

namespace lagrisk {
namespace detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre, 20 nodes, accepted when it agrees with the two half-interval
// sums. Callers pass nonnegative integrands so the relative test is meaningful.
template <class F>
double integrate_piece(const F& f, double a, double b, double whole, int depth) {
  using gl = boost::math::quadrature::gauss<double, 20>;
  const double m = 0.5 * (a + b);
  const double left = gl::integrate(f, a, m);
  const double right = gl::integrate(f, m, b);
  const double halves = left + right;
  if (depth >= 24 || std::abs(halves - whole) <= 1e-14 * std::abs(halves) || !(m > a && b > m)) return halves;
  return integrate_piece(f, a, m, left, depth + 1) + integrate_piece(f, m, b, right, depth + 1);
}

template <class F>
double integrate(const F& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return integrate_piece(f, a, b, boost::math::quadrature::gauss<double, 20>::integrate(f, a, b), 0);
}

double power_int(double u, int k) {
  switch (k) {
    case 0: return u;
    case 1: return 0.5 * u * u;
    case 2: return u * u * u / 3.0;
    case 3: return u * u * u * u / 4.0;
    default: return std::pow(u, k + 1) / (k + 1);
  }
}

}  // namespace

class DensityModel {
 public:
  virtual ~DensityModel() = default;

  [[nodiscard]] virtual Family family() const = 0;
  [[nodiscard]] virtual std::vector<double> parameters() const = 0;
  [[nodiscard]] virtual Interval support() const = 0;
  [[nodiscard]] virtual std::vector<double> kinks() const {
    const Interval s = support();
    return {s.lo, s.hi};
  }
  [[nodiscard]] virtual double pdf(double x) const = 0;
  [[nodiscard]] virtual double cdf(double x) const = 0;

  // t in [0, 1], already clamped.
  [[nodiscard]] virtual double quantile(double t) const { return bisect_quantile(t); }

  [[nodiscard]] virtual CenteredMoments moments(double l, double r, double c) const {
    const Interval s = support();
    const double a = std::max(l, s.lo);
    const double b = std::min(r, s.hi);
    CenteredMoments out{c, 0.0, 0.0, 0.0};
    if (!(b > a)) return out;
    // nonnegative integrands about the left end, so the relative tolerance is reachable
    const double m0 = mass(a, b);
    // local coordinate u = x - a keeps the weights exact on narrow blocks far from 0
    const double w = b - a;
    const double m1 = integrate([&](double u) { return u * pdf(a + u); }, 0.0, w);
    const double m2 = integrate([&](double u) { return u * u * pdf(a + u); }, 0.0, w);
    const double d = c - a;
    out.m0 = m0;
    out.m1 = m1 - d * m0;
    out.m2 = m2 - 2.0 * d * m1 + d * d * m0;
    return out;
  }

  [[nodiscard]] virtual double mass(double l, double r) const {
    if (!(r > l)) return 0.0;
    return cdf(r) - cdf(l);
  }

  [[nodiscard]] virtual const std::vector<std::pair<double, Density1D>>& components() const {
    static const std::vector<std::pair<double, Density1D>> empty;
    return empty;
  }

 protected:
  // Left-continuous generalized inverse: Newton steps kept inside a bracket
  // [lo, hi] with cdf(lo) < t <= cdf(hi), bisection when a step leaves it or
  // the density vanishes. Stops when Newton converges or the bracket is
  // 1e-12 * |support| wide, then takes one guarded Newton step.
  [[nodiscard]] double bisect_quantile(double t) const {
    const Interval s = support();
    if (t <= 0.0) return s.lo;
    if (t >= 1.0) return s.hi;
    return bracketed_quantile(t, s.lo, s.hi, 0.5 * (s.lo + s.hi));
  }

  // Same search started at x inside a valid bracket [lo, hi].
  [[nodiscard]] double bracketed_quantile(double t, double lo, double hi, double x) const {
    const Interval s = support();
    const double tol = 1e-12 * s.width();
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
      const double fx = cdf(x);
      if (fx < t) {
        lo = x;
      } else {
        hi = x;
      }
      const double dens = pdf(x);
      double next = dens > 0.0 ? x - (fx - t) / dens : lo;
      if (!(next > lo && next < hi)) {
        next = 0.5 * (lo + hi);
      } else if (std::abs(next - x) < tol) {
        // converged where the density is positive, so the root is unique
        return std::clamp(next, s.lo, s.hi);
      }
      if (next <= lo || next >= hi) break;
      x = next;
    }
    x = 0.5 * (lo + hi);
    const double f = pdf(x);
    if (f > 0.0) {
      const double step = (cdf(x) - t) / f;
      const double polished = x - step;
      if (polished >= lo - tol && polished <= hi + tol) x = polished;
    }
    return std::clamp(x, s.lo, s.hi);
  }
};

namespace {

class UniformModel final : public DensityModel {
 public:
  UniformModel(double a, double b) : a_(a), b_(b) {
    if (!(b > a) || !std::isfinite(a) || !std::isfinite(b)) {
      throw DomainError("uniform: require finite a < b");
    }
  }
  Family family() const override { return Family::uniform; }
  std::vector<double> parameters() const override { return {a_, b_}; }
  Interval support() const override { return {a_, b_}; }
  double pdf(double x) const override { return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0; }
  double cdf(double x) const override {
    if (x <= a_) return 0.0;
    if (x >= b_) return 1.0;
    return (x - a_) / (b_ - a_);
  }
  double quantile(double t) const override {
    if (t <= 0.0) return a_;
    if (t >= 1.0) return b_;
    return a_ + t * (b_ - a_);
  }
  CenteredMoments moments(double l, double r, double c) const override {
    CenteredMoments out{c, 0.0, 0.0, 0.0};
    const double lo = std::max(l, a_);
    const double hi = std::min(r, b_);
    if (!(hi > lo)) return out;
    const double inv = 1.0 / (b_ - a_);
    out.m0 = (hi - lo) * inv;
    out.m1 = (power_int(hi - c, 1) - power_int(lo - c, 1)) * inv;
    out.m2 = (power_int(hi - c, 2) - power_int(lo - c, 2)) * inv;
    return out;
  }

 private:
  double a_;
  double b_;
};

class TriangularModel final : public DensityModel {
 public:
  TriangularModel(double a, double c, double b) : a_(a), c_(c), b_(b) {
    if (!(b > a) || c < a || c > b || !std::isfinite(a) || !std::isfinite(b)) {
      throw DomainError("triangular: require a <= c <= b and a < b");
    }
  }
  Family family() const override { return Family::triangular; }
  std::vector<double> parameters() const override { return {a_, c_, b_}; }
  Interval support() const override { return {a_, b_}; }
  std::vector<double> kinks() const override { return {a_, c_, b_}; }
  double pdf(double x) const override {
    if (x < a_ || x > b_) return 0.0;
    if (x < c_) return 2.0 * (x - a_) / ((b_ - a_) * (c_ - a_));
    if (x > c_) return 2.0 * (b_ - x) / ((b_ - a_) * (b_ - c_));
    return 2.0 / (b_ - a_);
  }
  double cdf(double x) const override {
    if (x <= a_) return 0.0;
    if (x >= b_) return 1.0;
    if (x <= c_) return (x - a_) * (x - a_) / ((b_ - a_) * (c_ - a_));
    return 1.0 - (b_ - x) * (b_ - x) / ((b_ - a_) * (b_ - c_));
  }
  double quantile(double t) const override {
    if (t <= 0.0) return a_;
    if (t >= 1.0) return b_;
    const double split = (c_ - a_) / (b_ - a_);
    if (t <= split) return a_ + std::sqrt(t * (b_ - a_) * (c_ - a_));
    return b_ - std::sqrt((1.0 - t) * (b_ - a_) * (b_ - c_));
  }
  CenteredMoments moments(double l, double r, double c) const override {
    CenteredMoments out{c, 0.0, 0.0, 0.0};
    const double lo = std::max(l, a_);
    const double hi = std::min(r, b_);
    if (!(hi > lo)) return out;
    // Exact integration of u^k (f0 + s u) on each linear piece, u = x - c.
    auto add_piece = [&](double p, double q, double slope) {
      if (!(q > p)) return;
      const double f0 = pdf_linear(c, slope);
      const double up = p - c;
      const double uq = q - c;
      for (int k = 0; k < 3; ++k) {
        const double v = f0 * (power_int(uq, k) - power_int(up, k)) +
                         slope * (power_int(uq, k + 1) - power_int(up, k + 1));
        (k == 0 ? out.m0 : k == 1 ? out.m1 : out.m2) += v;
      }
    };
    const double rise = c_ > a_ ? 2.0 / ((b_ - a_) * (c_ - a_)) : 0.0;
    const double fall = b_ > c_ ? -2.0 / ((b_ - a_) * (b_ - c_)) : 0.0;
    add_piece(lo, std::min(hi, c_), rise);
    add_piece(std::max(lo, c_), hi, fall);
    return out;
  }

 private:
  // Value at x of the linear extension of the piece with the given slope.
  double pdf_linear(double x, double slope) const {
    if (slope > 0.0) return slope * (x - a_);
    return -slope * (b_ - x);
  }

  double a_;
  double c_;
  double b_;
};

class TruncatedGumbelModel final : public DensityModel {
 public:
  TruncatedGumbelModel(double loc, double scale, double lo, double hi)
      : loc_(loc), scale_(scale), lo_(lo), hi_(hi) {
    if (!(scale > 0.0) || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw DomainError("truncated_gumbel: require scale > 0 and finite lo < hi");
    }
    glo_ = raw_cdf(lo);
    norm_ = raw_cdf(hi) - glo_;
    if (!(norm_ > 0.0)) throw DomainError("truncated_gumbel: truncation interval has no mass");
  }
  Family family() const override { return Family::truncated_gumbel; }
  std::vector<double> parameters() const override { return {loc_, scale_, lo_, hi_}; }
  Interval support() const override { return {lo_, hi_}; }
  double pdf(double x) const override {
    if (x < lo_ || x > hi_) return 0.0;
    const double z = (x - loc_) / scale_;
    return std::exp(-(z + std::exp(-z))) / (scale_ * norm_);
  }
  double cdf(double x) const override {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    return std::clamp((raw_cdf(x) - glo_) / norm_, 0.0, 1.0);
  }
  double quantile(double t) const override {
    if (t <= 0.0) return lo_;
    if (t >= 1.0) return hi_;
    const double g = glo_ + t * norm_;
    return std::clamp(loc_ - scale_ * std::log(-std::log(g)), lo_, hi_);
  }

 private:
  double raw_cdf(double x) const { return std::exp(-std::exp(-(x - loc_) / scale_)); }

  double loc_, scale_, lo_, hi_;
  double glo_ = 0.0;
  double norm_ = 1.0;
};

class TruncatedNormalModel final : public DensityModel {
 public:
  TruncatedNormalModel(double mean, double sd, double lo, double hi)
      : mean_(mean), sd_(sd), lo_(lo), hi_param_(hi) {
    if (!(sd > 0.0) || !std::isfinite(lo) || std::isnan(hi)) {
      throw DomainError("truncated_normal: require std > 0 and finite lower bound");
    }
    hi_ = std::isfinite(hi) ? hi : mean + 12.0 * sd;
    if (!(hi_ > lo_)) throw DomainError("truncated_normal: require lo < hi");
    za_ = (lo_ - mean_) / sd_;
    zb_ = (hi_ - mean_) / sd_;
    phi_a_ = lower(za_);
    upper_a_ = upper(za_);
    norm_ = lower(zb_) - phi_a_;
    if (za_ > 0.0) norm_ = upper_a_ - upper(zb_);
    if (!(norm_ > 0.0)) throw DomainError("truncated_normal: truncation interval has no mass");
  }
  Family family() const override { return Family::truncated_normal; }
  std::vector<double> parameters() const override { return {mean_, sd_, lo_, hi_param_}; }
  Interval support() const override { return {lo_, hi_}; }
  double pdf(double x) const override {
    if (x < lo_ || x > hi_) return 0.0;
    const double z = (x - mean_) / sd_;
    return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * sd_ * norm_);
  }
  double cdf(double x) const override {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double z = (x - mean_) / sd_;
    const double v = za_ > 0.0 ? (upper_a_ - upper(z)) / norm_ : (lower(z) - phi_a_) / norm_;
    return std::clamp(v, 0.0, 1.0);
  }
  double quantile(double t) const override {
    if (t <= 0.0) return lo_;
    if (t >= 1.0) return hi_;
    // Work with whichever tail keeps the probability away from 1.
    const double p = phi_a_ + t * norm_;
    double z;
    if (p < 0.5) {
      z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
    } else {
      const double q = upper_a_ - t * norm_;
      z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * std::max(q, 1e-300));
    }
    double x = std::clamp(mean_ + sd_ * z, lo_, hi_);
    for (int it = 0; it < 2; ++it) {
      const double f = pdf(x);
      if (!(f > 0.0)) break;
      x = std::clamp(x - (cdf(x) - t) / f, lo_, hi_);
    }
    return x;
  }
  double mass(double l, double r) const override {
    const double a = std::max(l, lo_);
    const double b = std::min(r, hi_);
    if (!(b > a)) return 0.0;
    const double zl = (a - mean_) / sd_;
    const double zr = (b - mean_) / sd_;
    // Subtract in the tail where both values are small.
    if (zl > 0.0) return (upper(zl) - upper(zr)) / norm_;
    return (lower(zr) - lower(zl)) / norm_;
  }

 private:
  static double lower(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
  static double upper(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

  double mean_, sd_, lo_, hi_param_;
  double hi_ = 0.0;
  double za_ = 0.0, zb_ = 0.0;
  double phi_a_ = 0.0, upper_a_ = 1.0;
  double norm_ = 1.0;
};

class SemicircleModel final : public DensityModel {
 public:
  SemicircleModel(double center, double radius) : c_(center), r_(radius) {
    if (!(radius > 0.0) || !std::isfinite(center)) {
      throw DomainError("wigner_semicircle: require radius > 0");
    }
  }
  Family family() const override { return Family::wigner_semicircle; }
  std::vector<double> parameters() const override { return {c_, r_}; }
  Interval support() const override { return {c_ - r_, c_ + r_}; }
  double pdf(double x) const override {
    const double u = (x - c_) / r_;
    if (u <= -1.0 || u >= 1.0) return 0.0;
    return 2.0 / (std::numbers::pi * r_) * std::sqrt(1.0 - u * u);
  }
  double cdf(double x) const override {
    const double u = (x - c_) / r_;
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return std::clamp(0.5 + (u * std::sqrt(1.0 - u * u) + std::asin(u)) / std::numbers::pi, 0.0, 1.0);
  }
  // closed form in u = (x - c_) / r_, then shifted to the requested center
  CenteredMoments moments(double l, double r, double c) const override {
    const double ua = std::clamp((l - c_) / r_, -1.0, 1.0);
    const double ub = std::clamp((r - c_) / r_, -1.0, 1.0);
    CenteredMoments out{c, 0.0, 0.0, 0.0};
    if (!(ub > ua)) return out;
    auto g0 = [](double u) { return (u * std::sqrt(1.0 - u * u) + std::asin(u)) / std::numbers::pi; };
    auto g1 = [](double u) { return -2.0 / (3.0 * std::numbers::pi) * std::pow(1.0 - u * u, 1.5); };
    auto g2 = [](double u) {
      return (std::asin(u) - u * std::sqrt(1.0 - u * u) * (1.0 - 2.0 * u * u)) / (4.0 * std::numbers::pi);
    };
    const double m0 = g0(ub) - g0(ua);
    const double m1 = r_ * (g1(ub) - g1(ua));
    const double m2 = r_ * r_ * (g2(ub) - g2(ua));
    const double d = c - c_;
    out.m0 = m0;
    out.m1 = m1 - d * m0;
    out.m2 = m2 - 2.0 * d * m1 + d * d * m0;
    return out;
  }

 private:
  double c_;
  double r_;
};

class PowerLawModel final : public DensityModel {
 public:
  explicit PowerLawModel(double a) : a_(a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("power_law: require a > 0");
  }
  Family family() const override { return Family::power_law; }
  std::vector<double> parameters() const override { return {a_}; }
  Interval support() const override { return {0.0, 1.0}; }
  double pdf(double x) const override {
    if (x < 0.0 || x > 1.0) return 0.0;
    if (x == 0.0) return a_ < 1.0 ? kInf : (a_ == 1.0 ? 1.0 : 0.0);
    return a_ * std::pow(x, a_ - 1.0);
  }
  double cdf(double x) const override {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return std::pow(x, a_);
  }
  double quantile(double t) const override {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return std::pow(t, 1.0 / a_);
  }
  CenteredMoments moments(double l, double r, double c) const override {
    CenteredMoments out{c, 0.0, 0.0, 0.0};
    const double lo = std::max(l, 0.0);
    const double hi = std::min(r, 1.0);
    if (!(hi > lo)) return out;
    // raw_j = \int x^j a x^(a-1) dx over [lo, hi]
    auto raw = [&](int j) {
      const double e = a_ + j;
      return a_ / e * (std::pow(hi, e) - std::pow(lo, e));
    };
    const double r0 = raw(0), r1 = raw(1), r2 = raw(2);
    out.m0 = r0;
    out.m1 = r1 - c * r0;
    out.m2 = r2 - 2.0 * c * r1 + c * c * r0;
    return out;
  }

 private:
  double a_;
};

class MixtureModel final : public DensityModel {
 public:
  explicit MixtureModel(std::vector<std::pair<double, Density1D>> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw DomainError("mixture: need at least one component");
    double total = 0.0;
    for (const auto& [w, d] : parts_) {
      if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("mixture: weights must be positive");
      total += w;
    }
    for (auto& part : parts_) part.first /= total;
    support_ = parts_.front().second.support();
    for (const auto& part : parts_) {
      const Interval s = part.second.support();
      support_.lo = std::min(support_.lo, s.lo);
      support_.hi = std::max(support_.hi, s.hi);
    }
    table_.resize(table_size + 1);
    for (std::size_t k = 0; k <= table_size; ++k) table_[k] = cdf(grid(k));
    table_.back() = 1.0;
  }
  Family family() const override { return Family::mixture; }
  std::vector<double> parameters() const override { return {}; }
  const std::vector<std::pair<double, Density1D>>& components() const override { return parts_; }
  Interval support() const override { return support_; }
  std::vector<double> kinks() const override {
    std::vector<double> out;
    for (const auto& part : parts_) {
      const auto k = part.second.kinks();
      out.insert(out.end(), k.begin(), k.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  double pdf(double x) const override {
    double v = 0.0;
    for (const auto& [w, d] : parts_) v += w * d.pdf(x);
    return v;
  }
  double cdf(double x) const override {
    double v = 0.0;
    for (const auto& [w, d] : parts_) v += w * d.cdf(x);
    return v;
  }
  double mass(double l, double r) const override {
    double v = 0.0;
    for (const auto& [w, d] : parts_) v += w * d.mass(l, r);
    return v;
  }
  // The cdf table gives a bracket one grid cell wide and a secant start.
  double quantile(double t) const override {
    if (t <= 0.0) return support_.lo;
    if (t >= 1.0) return support_.hi;
    const auto k = static_cast<std::size_t>(std::lower_bound(table_.begin(), table_.end(), t) - table_.begin());
    if (k == 0) return bisect_quantile(t);
    const double lo = grid(k - 1);
    const double hi = grid(k);
    const double f0 = table_[k - 1];
    const double f1 = table_[k];
    const double x = f1 > f0 ? lo + (hi - lo) * (t - f0) / (f1 - f0) : 0.5 * (lo + hi);
    return bracketed_quantile(t, lo, hi, std::clamp(x, lo, hi));
  }
  CenteredMoments moments(double l, double r, double c) const override {
    CenteredMoments out{c, 0.0, 0.0, 0.0};
    for (const auto& [w, d] : parts_) {
      const CenteredMoments m = d.centered_moments(l, r, c);
      out.m0 += w * m.m0;
      out.m1 += w * m.m1;
      out.m2 += w * m.m2;
    }
    return out;
  }

 private:
  static constexpr std::size_t table_size = 4096;

  double grid(std::size_t k) const {
    if (k >= table_size) return support_.hi;
    return support_.lo + support_.width() * static_cast<double>(k) / static_cast<double>(table_size);
  }

  std::vector<std::pair<double, Density1D>> parts_;
  Interval support_;
  std::vector<double> table_;  ///< cdf on the grid
};

}  // namespace
}  // namespace detail

Density1D::Density1D(std::shared_ptr<const detail::DensityModel> model) : model_(std::move(model)) {}

Density1D Density1D::uniform(double a, double b) {
  return Density1D(std::make_shared<detail::UniformModel>(a, b));
}
Density1D Density1D::triangular(double a, double c, double b) {
  return Density1D(std::make_shared<detail::TriangularModel>(a, c, b));
}
Density1D Density1D::truncated_gumbel(double location, double scale, double lo, double hi) {
  return Density1D(std::make_shared<detail::TruncatedGumbelModel>(location, scale, lo, hi));
}
Density1D Density1D::truncated_normal(double mean, double std, double lo, double hi) {
  return Density1D(std::make_shared<detail::TruncatedNormalModel>(mean, std, lo, hi));
}
Density1D Density1D::wigner_semicircle(double center, double radius) {
  return Density1D(std::make_shared<detail::SemicircleModel>(center, radius));
}
Density1D Density1D::power_law(double a) { return Density1D(std::make_shared<detail::PowerLawModel>(a)); }
Density1D Density1D::mixture(std::vector<std::pair<double, Density1D>> parts) {
  return Density1D(std::make_shared<detail::MixtureModel>(std::move(parts)));
}

Family Density1D::family() const { return model_->family(); }

std::string_view Density1D::family_name() const {
  switch (family()) {
    case Family::uniform: return "uniform";
    case Family::triangular: return "triangular";
    case Family::truncated_gumbel: return "truncated_gumbel";
    case Family::truncated_normal: return "truncated_normal";
    case Family::wigner_semicircle: return "wigner_semicircle";
    case Family::power_law: return "power_law";
    case Family::mixture: return "mixture";
  }
  return "unknown";
}

std::vector<double> Density1D::parameters() const { return model_->parameters(); }
const std::vector<std::pair<double, Density1D>>& Density1D::components() const { return model_->components(); }
Interval Density1D::support() const { return model_->support(); }
std::vector<double> Density1D::kinks() const { return model_->kinks(); }
double Density1D::pdf(double x) const { return model_->pdf(x); }
double Density1D::cdf(double x) const { return model_->cdf(x); }

double Density1D::quantile(double t) const {
  if (!(t > 0.0 && t < 1.0)) {
    throw DomainError("quantile: level must lie in (0, 1), got " + std::to_string(t));
  }
  return model_->quantile(t);
}

double Density1D::quantile_clamped(double t) const {
  if (std::isnan(t)) throw DomainError("quantile: NaN level");
  return model_->quantile(std::clamp(t, 0.0, 1.0));
}

double Density1D::mass(double l, double r) const { return model_->mass(l, r); }

double Density1D::interval_moment(double l, double r, int k) const {
  if (k < 0 || k > 2) throw DomainError("interval_moment: k must be 0, 1 or 2");
  if (l > r) throw DomainError("interval_moment: require l <= r");
  const CenteredMoments m = model_->moments(l, r, 0.0);
  return k == 0 ? m.m0 : (k == 1 ? m.m1 : m.m2);
}

CenteredMoments Density1D::centered_moments(double l, double r, double center) const {
  return model_->moments(l, r, center);
}

double Density1D::mean() const {
  const Interval s = support();
  const double c = 0.5 * (s.lo + s.hi);
  return model_->moments(s.lo, s.hi, c).barycenter();
}

}  // namespace lagrisk
