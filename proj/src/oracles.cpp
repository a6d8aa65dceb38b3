#include "lagrisk/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "lagrisk/errors.hpp"
#include "lagrisk/min_cost_flow.hpp"
#include "lagrisk/sdot1d.hpp"

namespace lagrisk {

namespace {

bool flipped(const std::vector<bool>& flips, std::size_t j) { return j < flips.size() && flips[j]; }

void check_flips(const std::vector<bool>& flips, std::size_t d) {
  if (!flips.empty() && flips.size() != d) throw DomainError("flip mask length must match the number of marginals");
}

}  // namespace

ParticleCloud comonotone_points(std::span<const Density1D> marginals, std::size_t n, const std::vector<bool>& flips,
                                Placement placement) {
  const std::size_t d = marginals.size();
  check_flips(flips, d);
  if (n == 0) throw DomainError("comonotone_points: N must be positive");
  ParticleCloud cloud(n, d, 1.0 / static_cast<double>(n));
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> atoms(n);
    if (placement == Placement::barycenter) {
      atoms = quantize_1d(marginals[j], n).atoms;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        atoms[i] = marginals[j].quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
      }
    }
    if (flipped(flips, j)) std::reverse(atoms.begin(), atoms.end());
    for (std::size_t i = 0; i < n; ++i) cloud.at(i, j) = atoms[i];
  }
  return cloud;
}

double reference_value(const CostFunction& c, const SpectralFunction& alpha, std::span<const Density1D> marginals,
                       const std::vector<bool>& flips) {
  const std::size_t d = marginals.size();
  check_flips(flips, d);

  std::vector<double> cuts{0.0, 1.0};
  for (double t : alpha.discontinuities()) cuts.push_back(t);
  for (std::size_t j = 0; j < d; ++j) {
    for (double x : marginals[j].kinks()) {
      const double t = marginals[j].cdf(x);
      cuts.push_back(flipped(flips, j) ? 1.0 - t : t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return b - a < 1e-14; }), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [](double t) { return t < 0.0 || t > 1.0; }), cuts.end());

  std::vector<double> x(d);
  auto integrand = [&](double t) {
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = marginals[j].quantile_clamped(flipped(flips, j) ? 1.0 - t : t);
    }
    const double a = alpha(t);
    return a == 0.0 ? 0.0 : c(x) * a;
  };

  // tanh-sinh copes with the square-root endpoint behaviour of quantiles at kinks
  boost::math::quadrature::tanh_sinh<double> rule(12);
  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] <= cuts[k]) continue;
    double err = 0.0;
    total += rule.integrate(integrand, cuts[k], cuts[k + 1], 1e-13, &err);
    total_err += err;
  }
  if (!(total_err <= 1e-10) || !std::isfinite(total)) {
    throw ConvergenceError("reference_value: quadrature error estimate " + std::to_string(total_err), total_err);
  }
  return total;
}

QuantizerResult restriction_quantization(const Density1D& rho, double m, std::size_t n, Side side) {
  if (n == 0) throw DomainError("quantization: N must be positive");
  if (!(m > 0.0 && m <= 1.0)) throw DomainError("restriction_quantization: m must lie in (0, 1]");
  const double t0 = side == Side::left ? 0.0 : 1.0 - m;
  QuantizerResult q;
  q.atoms.resize(n);
  q.blocks.resize(n);
  double e2 = 0.0;
  double left = rho.quantile_clamped(t0);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = i + 1 == n && (side == Side::right || m == 1.0)
                             ? rho.support().hi
                             : rho.quantile_clamped(t0 + m * static_cast<double>(i + 1) / static_cast<double>(n));
    const CenteredMoments cm = rho.centered_moments(left, right, 0.5 * (left + right));
    const double b = cm.barycenter();
    q.atoms[i] = b;
    q.blocks[i] = {left, right};
    e2 += std::max(0.0, cm.cost_to(b));
    left = right;
  }
  q.error = std::sqrt(e2 / m);
  return q;
}

QuantizerResult quantize_1d(const Density1D& rho, std::size_t n) { return restriction_quantization(rho, 1.0, n); }

double block_approximation_cost(const ParticleCloud& cloud, std::span<const Density1D> marginals) {
  if (cloud.dim != marginals.size()) throw DomainError("block_approximation_cost: dimension mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < cloud.dim; ++j) total += balanced_value_grad(marginals[j], cloud.column(j)).value;
  return total;
}

BruteForceResult brute_force_mmot(const std::vector<std::vector<double>>& atoms, const CostFunction& c,
                                  const SpectralFunction& alpha) {
  const std::size_t d = atoms.size();
  if (d < 1 || d > 3) throw DomainError("brute_force_mmot: need 1 <= D <= 3");
  const std::size_t n = atoms[0].size();
  if (n < 1 || n > 6) throw DomainError("brute_force_mmot: need 1 <= N <= 6");
  for (const auto& list : atoms) {
    if (list.size() != n) throw DomainError("brute_force_mmot: atom lists must have equal length");
  }
  const BinWeights bins = bin_weights(alpha, n);

  std::vector<std::vector<std::size_t>> perm(d, std::vector<std::size_t>(n));
  for (auto& p : perm) std::iota(p.begin(), p.end(), std::size_t{0});

  BruteForceResult best;
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<double> values(n), x(d);

  auto evaluate = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[j] = atoms[j][perm[j][i]];
      values[i] = c(x);
    }
    const double v = risk_value_and_weights(bins, values).value;
    if (v > best.value) {
      best.value = v;
      best.assignment = perm;
    }
  };

  if (d == 1) {
    evaluate();
  } else if (d == 2) {
    do {
      evaluate();
    } while (std::next_permutation(perm[1].begin(), perm[1].end()));
  } else {
    do {
      std::iota(perm[2].begin(), perm[2].end(), std::size_t{0});
      do {
        evaluate();
      } while (std::next_permutation(perm[2].begin(), perm[2].end()));
    } while (std::next_permutation(perm[1].begin(), perm[1].end()));
  }
  return best;
}

double flow_partial_ot_oracle(const Density1D& rho, std::span<const double> z, double m, std::size_t atom_count) {
  if (atom_count < 500) throw DomainError("flow_partial_ot_oracle: need at least 500 atoms");
  if (!(m > 0.0)) throw DomainError("flow_partial_ot_oracle: m must be positive");
  if (m > 1.0) throw DomainError("flow_partial_ot_oracle: infeasible flow, m > 1");
  const std::size_t n = z.size();
  if (n == 0) throw DomainError("flow_partial_ot_oracle: no target atoms");

  const QuantizerResult src = quantize_1d(rho, atom_count);
  // unit of mass 1/(M N): sources hold N units, targets round(m M) units
  const auto source_units = static_cast<std::int64_t>(n);
  const auto target_units = static_cast<std::int64_t>(std::llround(m * static_cast<double>(atom_count)));
  if (target_units == 0) return 0.0;

  double cmax = 0.0;
  for (double x : src.atoms) {
    for (double zi : z) cmax = std::max(cmax, (x - zi) * (x - zi));
  }
  const double scale = cmax > 0.0 ? 1e12 / cmax : 1.0;

  const std::size_t s = atom_count + n;
  const std::size_t t = s + 1;
  MinCostFlow flow(t + 1);
  std::vector<std::size_t> arcs;
  arcs.reserve(atom_count * n);
  for (std::size_t k = 0; k < atom_count; ++k) flow.add_edge(s, k, source_units, 0);
  for (std::size_t k = 0; k < atom_count; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double cost = (src.atoms[k] - z[i]) * (src.atoms[k] - z[i]);
      arcs.push_back(flow.add_edge(k, atom_count + i, source_units, std::llround(cost * scale)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) flow.add_edge(atom_count + i, t, target_units, 0);

  const std::int64_t wanted = target_units * static_cast<std::int64_t>(n);
  const auto res = flow.solve(s, t, wanted);
  if (res.flow != wanted) throw DomainError("flow_partial_ot_oracle: infeasible flow");

  // cost of the optimal plan with unrounded costs
  double total = 0.0;
  const double unit = 1.0 / (static_cast<double>(atom_count) * static_cast<double>(n));
  std::size_t a = 0;
  for (std::size_t k = 0; k < atom_count; ++k) {
    for (std::size_t i = 0; i < n; ++i, ++a) {
      const auto f = flow.flow(arcs[a]);
      if (f == 0) continue;
      const double cost = (src.atoms[k] - z[i]) * (src.atoms[k] - z[i]);
      total += static_cast<double>(f) * unit * cost;
    }
  }
  return total;
}

RateFit fit_rate(std::span<const double> ns, std::span<const double> errors) {
  if (ns.size() != errors.size()) throw DomainError("fit_rate: size mismatch");
  if (ns.size() < 4) throw DomainError("fit_rate: need at least 4 points");
  RateFit fit;
  fit.ns.assign(ns.begin(), ns.end());
  fit.errors.assign(errors.begin(), errors.end());
  const std::size_t k = ns.size();
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(ns[i] > 0.0)) throw DomainError("fit_rate: N must be positive");
    if (!(errors[i] > 0.0)) throw DomainError("fit_rate: errors must be positive");
    lx[i] = std::log(ns[i]);
    ly[i] = std::log(errors[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(k);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_rate: N values must not all coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace lagrisk
