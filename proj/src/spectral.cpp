#include "lagrisk/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lagrisk/errors.hpp"

namespace lagrisk {

namespace {

// Sum of p_k c_k rounded once: exact products split by fma, then Shewchuk's
// nonoverlapping partials with the half-even correction of the final rounding.
// The value therefore does not depend on the order of the terms.
class ExactDot {
 public:
  void add_product(double a, double b) {
    const double hi = a * b;
    add(hi);
    add(std::fma(a, b, -hi));
  }

  [[nodiscard]] double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = 2.0 * lo;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  void add(double x) {
    std::size_t used = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[used++] = lo;
      x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
  }

  std::vector<double> partials_;
};

}  // namespace

SpectralFunction SpectralFunction::constant() { return {SpectralKind::constant, 0.0}; }

SpectralFunction SpectralFunction::cvar(double m) {
  if (!(m > 0.0 && m <= 1.0)) throw DomainError("cvar: mass must lie in (0, 1]");
  return {SpectralKind::cvar, m};
}

SpectralFunction SpectralFunction::linear() { return {SpectralKind::linear, 0.0}; }

SpectralFunction SpectralFunction::quadratic_offset(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("quadratic_offset: eta must be positive");
  return {SpectralKind::quadratic_offset, eta};
}

SpectralFunction SpectralFunction::piecewise_constant(std::vector<double> breakpoints, std::vector<double> values) {
  if (breakpoints.size() != values.size() + 1 || values.empty()) {
    throw DomainError("piecewise_constant: need one more breakpoint than values");
  }
  if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0) {
    throw DomainError("piecewise_constant: breakpoints must start at 0 and end at 1");
  }
  double integral = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(breakpoints[k + 1] > breakpoints[k])) throw DomainError("piecewise_constant: breakpoints must increase");
    if (!(values[k] >= 0.0)) throw DomainError("piecewise_constant: values must be nonnegative");
    if (k > 0 && values[k] < values[k - 1]) throw DomainError("piecewise_constant: values must be nondecreasing");
    integral += values[k] * (breakpoints[k + 1] - breakpoints[k]);
  }
  if (std::abs(integral - 1.0) > 1e-12) throw DomainError("piecewise_constant: integral must equal one");
  SpectralFunction out(SpectralKind::piecewise_constant, 0.0);
  out.breaks_ = std::move(breakpoints);
  out.values_ = std::move(values);
  return out;
}

std::string_view SpectralFunction::name() const {
  switch (kind_) {
    case SpectralKind::constant: return "constant";
    case SpectralKind::cvar: return "cvar";
    case SpectralKind::linear: return "linear";
    case SpectralKind::quadratic_offset: return "quadratic_offset";
    case SpectralKind::piecewise_constant: return "piecewise_constant";
  }
  return "unknown";
}

double SpectralFunction::operator()(double t) const {
  switch (kind_) {
    case SpectralKind::constant: return 1.0;
    case SpectralKind::cvar: return t > 1.0 - param_ ? 1.0 / param_ : 0.0;
    case SpectralKind::linear: return 2.0 * t;
    case SpectralKind::quadratic_offset: return (t * t + 2.0 * param_ * t) / (1.0 / 3.0 + param_);
    case SpectralKind::piecewise_constant: {
      const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
      const auto k = std::clamp<std::ptrdiff_t>(it - breaks_.begin() - 1, 0, std::ssize(values_) - 1);
      return values_[static_cast<std::size_t>(k)];
    }
  }
  return 0.0;
}

double SpectralFunction::cumulative(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  switch (kind_) {
    case SpectralKind::constant: return t;
    case SpectralKind::cvar: return std::max(0.0, t - (1.0 - param_)) / param_;
    case SpectralKind::linear: return t * t;
    case SpectralKind::quadratic_offset: return (t * t * t / 3.0 + param_ * t * t) / (1.0 / 3.0 + param_);
    case SpectralKind::piecewise_constant: {
      double acc = 0.0;
      for (std::size_t k = 0; k < values_.size() && breaks_[k] < t; ++k) {
        acc += values_[k] * (std::min(t, breaks_[k + 1]) - breaks_[k]);
      }
      return acc;
    }
  }
  return 0.0;
}

std::vector<double> SpectralFunction::discontinuities() const {
  switch (kind_) {
    case SpectralKind::cvar:
      return param_ < 1.0 ? std::vector<double>{1.0 - param_} : std::vector<double>{};
    case SpectralKind::piecewise_constant:
      return {breaks_.begin() + 1, breaks_.end() - 1};
    default:
      return {};
  }
}

BinWeights bin_weights(const SpectralFunction& alpha, std::size_t n) {
  if (n == 0) throw DomainError("bin_weights: N must be positive");
  BinWeights out;
  out.p.resize(n);
  const double dn = static_cast<double>(n);
  switch (alpha.kind()) {
    case SpectralKind::constant:
      std::fill(out.p.begin(), out.p.end(), 1.0 / dn);
      break;
    case SpectralKind::linear:
      // (i^2 - (i-1)^2) / N^2 with exact integer numerators.
      for (std::size_t i = 0; i < n; ++i) out.p[i] = static_cast<double>(2 * i + 1) / (dn * dn);
      break;
    case SpectralKind::cvar: {
      const double m = alpha.mass();
      const double full = 1.0 / (dn * m);
      const double start = 1.0 - m;
      for (std::size_t i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / dn;
        const double hi = static_cast<double>(i + 1) / dn;
        if (lo >= start) {
          out.p[i] = full;
        } else if (hi <= start) {
          out.p[i] = 0.0;
        } else {
          out.p[i] = (hi - start) / m;
        }
      }
      break;
    }
    case SpectralKind::piecewise_constant: {
      // Full bins get exactly v / N; a bin crossing breakpoints adds the jumps
      // and is clamped between its end values so rounding keeps p monotone.
      const auto& br = alpha.breakpoints();
      const auto& v = alpha.values();
      std::size_t k = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / dn;
        const double hi = static_cast<double>(i + 1) / dn;
        while (k + 1 < v.size() && br[k + 1] <= lo) ++k;
        const double first = v[k] / dn;
        double p = first;
        std::size_t q = k;
        while (q + 1 < v.size() && br[q + 1] < hi) {
          p += (v[q + 1] - v[q]) * (hi - br[q + 1]);
          ++q;
        }
        out.p[i] = std::clamp(p, first, v[q] / dn);
      }
      break;
    }
    default: {
      double prev = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double next = alpha.cumulative(static_cast<double>(i + 1) / dn);
        out.p[i] = std::max(0.0, next - prev);
        prev = next;
      }
      break;
    }
  }
  return out;
}

RiskEvaluation risk_value_and_weights(const BinWeights& bins, std::span<const double> values) {
  const std::size_t n = values.size();
  if (bins.size() != n) throw DomainError("risk_value_and_weights: size mismatch with bin weights");
  for (double v : values) {
    if (std::isnan(v)) throw DomainError("risk_value_and_weights: NaN value");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  RiskEvaluation out;
  out.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.weights[order[k]] = bins.p[k];
  // Rounded once, so permutations of the input and of tied ranks give the same value.
  if (std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
    ExactDot dot;
    for (std::size_t k = 0; k < n; ++k) dot.add_product(bins.p[k], values[order[k]]);
    out.value = dot.value();
  } else {
    for (std::size_t k = 0; k < n; ++k) out.value += bins.p[k] * values[order[k]];
  }
  return out;
}

RiskEvaluation risk_value_and_weights(const SpectralFunction& alpha, std::span<const double> values) {
  return risk_value_and_weights(bin_weights(alpha, values.size()), values);
}

}  // namespace lagrisk
