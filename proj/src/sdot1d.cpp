#include "lagrisk/sdot1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lagrisk/errors.hpp"

namespace lagrisk {

namespace {

struct CellStats {
  double mass = 0.0;
  double barycenter = 0.0;
  double variance = 0.0;

  [[nodiscard]] double cost_to(double z) const {
    const double d = z - barycenter;
    return variance + mass * d * d;
  }
  [[nodiscard]] double grad_at(double z) const { return 2.0 * mass * (z - barycenter); }
};

CellStats cell_stats(const Density1D& rho, double l, double r) {
  const double center = 0.5 * (l + r);
  const CenteredMoments m = rho.centered_moments(l, r, center);
  CellStats out;
  out.mass = m.m0;
  if (m.m0 > 0.0) {
    out.barycenter = center + m.m1 / m.m0;
    out.variance = std::max(0.0, m.m2 - m.m1 * m.m1 / m.m0);
  } else {
    out.barycenter = center;
  }
  return out;
}

std::vector<std::size_t> stable_order(std::span<const double> z) {
  for (double v : z) {
    if (!std::isfinite(v)) throw DomainError("semi-discrete transport: atom positions must be finite");
  }
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  return order;
}

// A run of consecutive (sorted) atoms whose cells are contiguous in quantile
// space: the cells are [Q(a + i mu), Q(a + (i+1) mu)] for i < count.
struct Chain {
  std::size_t first = 0;
  std::size_t count = 0;
  double a = 0.0;

  [[nodiscard]] double end(double mu) const { return a + static_cast<double>(count) * mu; }
};

class ChainSolver {
 public:
  ChainSolver(const Density1D& rho, std::span<const double> sorted, double mu)
      : rho_(rho), z_(sorted), mu_(mu) {}

  double level(const Chain& c, std::size_t i) const {
    return rho_.quantile_clamped(c.a + static_cast<double>(i) * mu_);
  }

  // Derivative of the chain's transport cost with respect to its starting
  // level a, up to the positive factor 1 / rho(Q(a)):
  //   sum_i (x_{i+1} - z_i)^2 - (x_i - z_i)^2.
  double slope(std::size_t first, std::size_t count, double a) const {
    double prev = rho_.quantile_clamped(a);
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double next = rho_.quantile_clamped(a + static_cast<double>(i + 1) * mu_);
      const double z = z_[first + i];
      s += (next - prev) * (next + prev - 2.0 * z);
      prev = next;
    }
    return s;
  }

  // slope() together with its derivative in a, using dQ/dt = 1 / rho(Q);
  // the derivative is +inf when a cell boundary sits where rho vanishes.
  std::pair<double, double> slope_with_derivative(std::size_t first, std::size_t count, double a) const {
    auto at = [&](double t) {
      const double x = rho_.quantile_clamped(t);
      const double dens = rho_.pdf(x);
      const double dx = t >= 1.0 ? 0.0 : (dens > 0.0 ? 1.0 / dens : std::numeric_limits<double>::infinity());
      return std::pair{x, dx};
    };
    auto [prev, dprev] = at(a);
    double s = 0.0;
    double ds = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const auto [next, dnext] = at(a + static_cast<double>(i + 1) * mu_);
      const double z = z_[first + i];
      s += (next - prev) * (next + prev - 2.0 * z);
      ds += 2.0 * (next - z) * dnext - 2.0 * (prev - z) * dprev;
      prev = next;
      dprev = dnext;
    }
    return {s, ds};
  }

  // Optimal starting level of the chain in [0, 1 - count mu]. The slope is
  // negative then positive in a, so the root is found by Newton on a bracket,
  // warm started from c.a. The ends of the range are only evaluated when an
  // iterate heads there.
  void solve(Chain& c) const {
    const double hi = std::max(0.0, 1.0 - static_cast<double>(c.count) * mu_);
    if (hi <= 0.0) {
      c.a = 0.0;
      return;
    }
    double lo = 0.0;
    double up = hi;
    bool lo_checked = false;
    bool up_checked = false;
    // true when the answer is that end of the range
    auto end_is_root = [&](bool left) {
      if (left) {
        lo_checked = true;
        return slope(c.first, c.count, 0.0) >= 0.0;
      }
      up_checked = true;
      return slope(c.first, c.count, hi) <= 0.0;
    };
    // a lies in [0, 1]; cell masses only need it to about 1e-14
    const double width = 1e-14;
    double x = c.a > 0.0 && c.a < hi ? c.a : 0.5 * hi;
    double step = hi;
    double step_before = hi;
    for (int it = 0; it < 200; ++it) {
      const auto [fx, dfx] = slope_with_derivative(c.first, c.count, x);
      if (fx == 0.0) break;
      if (fx < 0.0) {
        lo = x;
      } else {
        up = x;
      }
      if (up - lo <= width) break;
      const bool newton_ok = dfx > 0.0 && std::isfinite(dfx);
      double next = newton_ok ? x - fx / dfx : 0.5 * (lo + up);
      if (newton_ok && std::abs(next - x) <= width) break;
      const bool bisect = !(next > lo && next < up) || std::abs(next - x) > 0.5 * std::abs(step_before);
      if (bisect) {
        // before narrowing onto an end that was never evaluated, check it
        if (lo == 0.0 && !lo_checked && next <= x && end_is_root(true)) {
          c.a = 0.0;
          return;
        }
        if (up == hi && !up_checked && next >= x && end_is_root(false)) {
          c.a = hi;
          return;
        }
        next = 0.5 * (lo + up);
      }
      step_before = step;
      step = next - x;
      x = next;
      if (std::abs(step) <= width) break;
    }
    if (lo == 0.0 && x - lo <= width && !lo_checked && end_is_root(true)) x = 0.0;
    if (up == hi && up - x <= width && !up_checked && end_is_root(false)) x = hi;
    c.a = x;
  }

  // Dual weights psi_i of the chain's atoms together with the interior
  // boundary slacks psi_i - (x_{i+1} - z_i)^2 (must be >= 0 for a valid chain).
  void dual(const Chain& c, std::vector<double>& psi, std::vector<double>& slack) const {
    const std::size_t k = c.count;
    std::vector<double> x(k + 1);
    for (std::size_t i = 0; i <= k; ++i) x[i] = level(c, i);
    psi.assign(k, 0.0);
    slack.assign(k > 0 ? k - 1 : 0, 0.0);
    auto zi = [&](std::size_t i) { return z_[c.first + i]; };
    auto sq = [](double v) { return v * v; };
    // Relative weights from the Laguerre boundary conditions.
    for (std::size_t i = 1; i < k; ++i) {
      psi[i] = psi[i - 1] + sq(x[i] - zi(i)) - sq(x[i] - zi(i - 1));
    }
    const bool full = c.end(mu_) >= 1.0 - 1e-14 && c.a <= 0.0;
    double shift;
    if (full) {
      shift = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        shift = std::max(shift, std::max(sq(x[i] - zi(i)), sq(x[i + 1] - zi(i))) - psi[i]);
      }
      for (std::size_t i = 0; i < k; ++i) shift = std::max(shift, -psi[i]);
    } else if (c.a <= 0.0) {
      shift = sq(x[k] - zi(k - 1)) - psi[k - 1];
    } else {
      shift = sq(x[0] - zi(0)) - psi[0];
    }
    for (auto& p : psi) p += shift;
    for (std::size_t i = 0; i + 1 < k; ++i) slack[i] = psi[i] - sq(x[i + 1] - zi(i));
  }

 private:
  const Density1D& rho_;
  std::span<const double> z_;
  double mu_;
};

}  // namespace

BalancedPenalty::BalancedPenalty(Density1D rho, std::size_t n) : rho_(std::move(rho)) {
  if (n == 0) throw DomainError("balanced penalty: need at least one atom");
  blocks_.resize(n);
  const double dn = static_cast<double>(n);
  double left = rho_.quantile_clamped(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = rho_.quantile_clamped(static_cast<double>(i + 1) / dn);
    const CellStats s = cell_stats(rho_, left, right);
    blocks_[i] = {left, right, s.mass, s.barycenter, s.variance};
    left = right;
  }
}

PenaltyResult BalancedPenalty::evaluate(std::span<const double> z, bool with_cells) const {
  if (z.size() != blocks_.size()) throw DomainError("balanced penalty: atom count mismatch");
  const auto order = stable_order(z);
  PenaltyResult out;
  out.grad.assign(z.size(), 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Block& b = blocks_[k];
    const double zk = z[order[k]];
    const double d = zk - b.barycenter;
    out.value += b.variance + b.mass * d * d;
    out.grad[order[k]] = 2.0 * b.mass * d;
  }
  if (with_cells) {
    out.cells.partial = false;
    out.cells.mass_per_atom = 1.0 / static_cast<double>(z.size());
    out.cells.cells.reserve(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Block& b = blocks_[k];
      out.cells.cells.push_back({order[k], b.l, b.r, b.mass, b.barycenter, 0.0});
      out.cells.kkt_residual = std::max(out.cells.kkt_residual, std::abs(b.mass - out.cells.mass_per_atom));
    }
    out.cells.order = order;
  }
  return out;
}

PenaltyResult balanced_value_grad(const Density1D& rho, std::span<const double> z) {
  return BalancedPenalty(rho, z.size()).evaluate(z);
}

PenaltyResult partial_value_grad(const Density1D& rho, std::span<const double> z, double m,
                                 const PartialOptions& options) {
  if (!(m > 0.0 && m <= 1.0)) throw DomainError("partial transport: mass must lie in (0, 1]");
  const std::size_t n = z.size();
  if (n == 0) throw DomainError("partial transport: need at least one atom");
  const auto order = stable_order(z);
  std::vector<double> sorted(n);
  for (std::size_t k = 0; k < n; ++k) sorted[k] = z[order[k]];
  const double mu = m / static_cast<double>(n);

  const ChainSolver solver(rho, sorted, mu);
  std::vector<Chain> chains(n);
  for (std::size_t k = 0; k < n; ++k) {
    chains[k] = {k, 1, 0.0};
    solver.solve(chains[k]);
  }

  auto overlaps = [&](const Chain& left, const Chain& right) { return left.end(mu) > right.a + 1e-15; };

  int sweeps = 0;
  bool settled = false;
  std::vector<double> psi;
  std::vector<double> slack;
  while (sweeps < options.max_dual_iters) {
    ++sweeps;
    // Merge overlapping neighbours; a merged chain may grow into its left
    // neighbour, which is checked again at once.
    bool changed = false;
    std::vector<Chain> next;
    next.reserve(chains.size());
    for (const Chain& c : chains) {
      next.push_back(c);
      while (next.size() >= 2 && overlaps(next[next.size() - 2], next.back())) {
        Chain merged{next[next.size() - 2].first, next[next.size() - 2].count + next.back().count,
                     next[next.size() - 2].a};
        next.pop_back();
        next.back() = merged;
        solver.solve(next.back());
        changed = true;
      }
    }
    chains = std::move(next);
    if (changed) continue;

    // No overlaps left; split chains whose interior boundary lies outside
    // both balls, provided the two halves then stay apart. Halves are checked
    // again within the same sweep.
    bool split = false;
    next.clear();
    std::vector<Chain> pending(chains.rbegin(), chains.rend());
    while (!pending.empty()) {
      const Chain c = pending.back();
      pending.pop_back();
      if (c.count >= 2) {
        solver.dual(c, psi, slack);
        const auto worst = std::min_element(slack.begin(), slack.end());
        const double scale = std::max(1.0, psi.empty() ? 1.0 : *std::max_element(psi.begin(), psi.end()));
        if (*worst < -1e-12 * scale) {
          const std::size_t cut = static_cast<std::size_t>(worst - slack.begin()) + 1;
          Chain left{c.first, cut, c.a};
          Chain right{c.first + cut, c.count - cut, c.a + static_cast<double>(cut) * mu};
          solver.solve(left);
          solver.solve(right);
          if (!overlaps(left, right)) {
            pending.push_back(right);
            pending.push_back(left);
            split = true;
            continue;
          }
        }
      }
      next.push_back(c);
    }
    chains = std::move(next);
    if (!split) {
      settled = true;
      break;
    }
  }

  PenaltyResult out;
  out.grad.assign(n, 0.0);
  out.cells.partial = true;
  out.cells.mass_per_atom = mu;
  out.cells.sweeps = sweeps;
  out.cells.order = order;
  out.cells.cells.reserve(n);
  double residual = 0.0;
  for (const Chain& c : chains) {
    solver.dual(c, psi, slack);
    double left = solver.level(c, 0);
    for (std::size_t i = 0; i < c.count; ++i) {
      const double right = solver.level(c, i + 1);
      const std::size_t k = c.first + i;
      const CellStats s = cell_stats(rho, left, right);
      out.value += s.cost_to(sorted[k]);
      out.grad[order[k]] = s.grad_at(sorted[k]);
      out.cells.cells.push_back({order[k], left, right, s.mass, s.barycenter, psi[i]});
      residual = std::max(residual, std::abs(rho.mass(left, right) - mu));
      left = right;
    }
  }
  out.cells.kkt_residual = residual;
  if (!settled) {
    throw ConvergenceError("partial transport dual did not settle after " + std::to_string(sweeps) + " sweeps",
                           residual);
  }
  if (residual > options.kkt_tol) {
    throw ConvergenceError("partial transport dual: cell mass residual " + std::to_string(residual) +
                               " exceeds tolerance",
                           residual);
  }
  return out;
}

}  // namespace lagrisk
