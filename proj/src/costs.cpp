#include "lagrisk/costs.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "lagrisk/errors.hpp"

namespace lagrisk {

struct CostFunction::Impl {
  CostKind kind;
  std::vector<double> weights;
  std::vector<bool> mask;
  std::shared_ptr<const CostFunction> inner;
};

CostFunction::CostFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

CostFunction CostFunction::squared_sum_surplus() {
  return CostFunction(std::make_shared<Impl>(Impl{CostKind::squared_sum_surplus, {}, {}, nullptr}));
}

CostFunction CostFunction::pairwise_quadratic(std::vector<double> weights) {
  if (weights.empty()) throw DomainError("pairwise_quadratic: need weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("pairwise_quadratic: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("pairwise_quadratic: weights must sum to one");
  return CostFunction(std::make_shared<Impl>(Impl{CostKind::pairwise_quadratic, std::move(weights), {}, nullptr}));
}

CostFunction CostFunction::coulomb_regularized() {
  return CostFunction(std::make_shared<Impl>(Impl{CostKind::coulomb_regularized, {}, {}, nullptr}));
}

CostFunction CostFunction::river_overflow() {
  return CostFunction(std::make_shared<Impl>(Impl{CostKind::river_overflow, {}, {}, nullptr}));
}

CostFunction CostFunction::product() {
  return CostFunction(std::make_shared<Impl>(Impl{CostKind::product, {}, {}, nullptr}));
}

CostFunction CostFunction::linear_sum() {
  return CostFunction(std::make_shared<Impl>(Impl{CostKind::linear_sum, {}, {}, nullptr}));
}

CostFunction CostFunction::sign_flips(std::vector<bool> mask, CostFunction inner) {
  if (inner.dimension() != 0 && mask.size() != inner.dimension()) {
    throw DomainError("sign_flips: mask length must match the inner cost dimension");
  }
  return CostFunction(std::make_shared<Impl>(
      Impl{CostKind::sign_flips, {}, std::move(mask), std::make_shared<const CostFunction>(std::move(inner))}));
}

CostKind CostFunction::kind() const { return impl_->kind; }

std::string_view CostFunction::name() const {
  switch (impl_->kind) {
    case CostKind::squared_sum_surplus: return "squared_sum_surplus";
    case CostKind::pairwise_quadratic: return "pairwise_quadratic";
    case CostKind::coulomb_regularized: return "coulomb_reg";
    case CostKind::river_overflow: return "river_overflow";
    case CostKind::product: return "product";
    case CostKind::linear_sum: return "linear_sum";
    case CostKind::sign_flips: return "sign_flips";
  }
  return "unknown";
}

std::size_t CostFunction::dimension() const {
  switch (impl_->kind) {
    case CostKind::river_overflow: return 6;
    case CostKind::pairwise_quadratic: return impl_->weights.size();
    case CostKind::sign_flips: return impl_->mask.size();
    default: return 0;
  }
}

const std::vector<double>& CostFunction::weights() const { return impl_->weights; }
const std::vector<bool>& CostFunction::mask() const { return impl_->mask; }
const CostFunction* CostFunction::inner() const { return impl_->inner.get(); }

namespace {

void check_dimension(std::size_t expected, std::size_t got) {
  if (expected != 0 && expected != got) {
    throw CostDomainError("cost expects dimension " + std::to_string(expected) + ", got " + std::to_string(got));
  }
}

struct RiverTerms {
  double c;
  double gap;
};

RiverTerms river_terms(std::span<const double> x) {
  const double q = x[0], ks = x[1], zv = x[2], zm = x[3], len = x[4], width = x[5];
  const double gap = zm - zv;
  if (!(gap > 0.0) || !(q > 0.0) || !(ks > 0.0) || !(len > 0.0) || !(width > 0.0)) {
    throw CostDomainError("river_overflow: require Zm > Zv and Q, Ks, L, B > 0");
  }
  const double ratio = q / (width * ks * std::sqrt(gap / len));
  return {std::pow(ratio, 0.6), gap};
}

}  // namespace

double CostFunction::operator()(std::span<const double> x) const {
  check_dimension(dimension(), x.size());
  const std::size_t d = x.size();
  switch (impl_->kind) {
    case CostKind::squared_sum_surplus: {
      const double s = std::accumulate(x.begin(), x.end(), 0.0);
      return -s * s;
    }
    case CostKind::pairwise_quadratic: {
      const auto& w = impl_->weights;
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = x[j] - x[k];
          v += w[j] * w[k] * diff * diff;
        }
      }
      return v;
    }
    case CostKind::coulomb_regularized: {
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j + 1; k < d; ++k) v += 1.0 / (1.0 + std::abs(x[j] - x[k]));
      }
      return v;
    }
    case CostKind::river_overflow: return river_terms(x).c;
    case CostKind::product: {
      double v = 1.0;
      for (double xi : x) v *= xi;
      return v;
    }
    case CostKind::linear_sum: return std::accumulate(x.begin(), x.end(), 0.0);
    case CostKind::sign_flips: {
      std::vector<double> y(x.begin(), x.end());
      for (std::size_t j = 0; j < d; ++j) {
        if (impl_->mask[j]) y[j] = -y[j];
      }
      return (*impl_->inner)(y);
    }
  }
  return 0.0;
}

void CostFunction::gradient(std::span<const double> x, std::span<double> g) const {
  check_dimension(dimension(), x.size());
  const std::size_t d = x.size();
  if (g.size() != d) throw DomainError("cost gradient: output size mismatch");
  switch (impl_->kind) {
    case CostKind::squared_sum_surplus: {
      const double s = std::accumulate(x.begin(), x.end(), 0.0);
      std::fill(g.begin(), g.end(), -2.0 * s);
      return;
    }
    case CostKind::pairwise_quadratic: {
      const auto& w = impl_->weights;
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += w[k] * (x[j] - x[k]);
        g[j] = 4.0 * w[j] * acc;
      }
      return;
    }
    case CostKind::coulomb_regularized: {
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j + 1; k < d; ++k) {
          const double diff = x[j] - x[k];
          const double denom = 1.0 + std::abs(diff);
          const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          const double dj = -sgn / (denom * denom);
          g[j] += dj;
          g[k] -= dj;
        }
      }
      return;
    }
    case CostKind::river_overflow: {
      const RiverTerms t = river_terms(x);
      g[0] = 0.6 * t.c / x[0];
      g[1] = -0.6 * t.c / x[1];
      g[2] = 0.3 * t.c / t.gap;
      g[3] = -0.3 * t.c / t.gap;
      g[4] = 0.3 * t.c / x[4];
      g[5] = -0.6 * t.c / x[5];
      return;
    }
    case CostKind::product: {
      for (std::size_t j = 0; j < d; ++j) {
        double v = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
          if (k != j) v *= x[k];
        }
        g[j] = v;
      }
      return;
    }
    case CostKind::linear_sum:
      std::fill(g.begin(), g.end(), 1.0);
      return;
    case CostKind::sign_flips: {
      std::vector<double> y(x.begin(), x.end());
      for (std::size_t j = 0; j < d; ++j) {
        if (impl_->mask[j]) y[j] = -y[j];
      }
      impl_->inner->gradient(y, g);
      for (std::size_t j = 0; j < d; ++j) {
        if (impl_->mask[j]) g[j] = -g[j];
      }
      return;
    }
  }
}

std::vector<double> CostFunction::gradient(std::span<const double> x) const {
  std::vector<double> g(x.size());
  gradient(x, g);
  return g;
}

std::vector<bool> river_compatibility_flips() { return {false, true, false, true, false, true}; }

}  // namespace lagrisk
