#include "lagrisk/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "lagrisk/errors.hpp"

namespace lagrisk {

void ProblemSpec::validate() const {
  if (marginals.size() < 2) throw DomainError("problem needs at least two marginals");
  if (n == 0) throw DomainError("problem needs N >= 1");
  if (sense != 1 && sense != -1) throw DomainError("sense must be +1 or -1");
  if (cost.dimension() != 0 && cost.dimension() != marginals.size()) {
    throw DomainError("cost " + std::string(cost.name()) + " expects dimension " + std::to_string(cost.dimension()) +
                      ", got " + std::to_string(marginals.size()));
  }
  if (mode == Mode::partial) {
    if (!(mass > 0.0 && mass <= 1.0)) throw DomainError("partial mode needs mass in (0, 1]");
    const auto kind = spectral.kind();
    if (kind != SpectralKind::constant && kind != SpectralKind::cvar) {
      throw DomainError("partial mode supports the constant or cvar spectral function only");
    }
  }
}

ParticleCloud::ParticleCloud(std::size_t n_points, std::size_t dimension, double point_mass)
    : n(n_points), dim(dimension), positions(n_points * dimension, 0.0), mass_per_point(point_mass) {}

std::vector<double> ParticleCloud::column(std::size_t j) const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = positions[i * dim + j];
  return out;
}

void RateModel::validate() const {
  if (!(p >= 1.0)) throw DomainError("rate model: p must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("rate model: beta must lie in (0, 1]");
  if (!(d >= 1.0)) throw DomainError("rate model: d must be >= 1");
}

double RateModel::tau(std::size_t n) const {
  const double nn = static_cast<double>(n);
  if (d == p) return std::pow(std::log(nn), 1.0 / d) * std::pow(nn, -1.0 / d);
  return std::pow(nn, -1.0 / std::max(p, d));
}

double RateModel::h(std::size_t n, std::span<const Density1D> marginals) {
  double worst = 0.0;
  for (const auto& rho : marginals) {
    BalancedPenalty blocks(rho, n);
    double e2 = 0.0;
    for (const auto& b : blocks.blocks()) e2 += b.variance;
    worst = std::max(worst, std::sqrt(e2));
  }
  return worst;
}

double RateModel::lambda(std::size_t n, std::span<const Density1D> marginals) const {
  validate();
  const double u = proxy == Proxy::tau ? tau(n) : h(n, marginals);
  if (!(u > 0.0)) throw DomainError("rate model: quantization proxy vanished");
  return std::pow(u, -(p - beta));
}

Schedule Schedule::powers_of_ten(int k_min, int k_max) {
  if (k_max < k_min) throw DomainError("schedule: empty power range");
  Schedule s;
  for (int k = k_min; k <= k_max; ++k) s.lambdas.push_back(std::pow(10.0, k));
  return s;
}

Schedule Schedule::from_rate(const RateModel& rule, std::size_t n, std::span<const Density1D> marginals, int k_min) {
  const double target = rule.lambda(n, marginals);
  Schedule s;
  for (int k = k_min; std::pow(10.0, k) < target; ++k) s.lambdas.push_back(std::pow(10.0, k));
  s.lambdas.push_back(target);
  return s;
}

void Schedule::validate() const {
  if (lambdas.empty()) throw DomainError("schedule: no lambda values");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] > 0.0) || !std::isfinite(lambdas[k])) throw DomainError("schedule: lambda must be finite and positive");
    if (k > 0 && lambdas[k] <= lambdas[k - 1]) throw DomainError("schedule: lambdas must be strictly increasing");
  }
}

namespace {

template <class F>
void for_each_marginal(std::size_t count, unsigned threads, F&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t j = 0; j < count; ++j) body(j);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = w; j < count; j += workers) body(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

DiscreteObjective::DiscreteObjective(ProblemSpec spec, SolverOptions options)
    : spec_(std::move(spec)), options_(options) {
  spec_.validate();
  if (spec_.mode == Mode::full) {
    bins_ = bin_weights(spec_.spectral, spec_.n);
    for (const auto& rho : spec_.marginals) balanced_.emplace_back(rho, spec_.n);
  } else {
    bins_.p.assign(spec_.n, 1.0 / static_cast<double>(spec_.n));
  }
}

Box DiscreteObjective::support_box() const {
  const std::size_t d = spec_.dimension();
  Box box;
  box.lower.resize(spec_.n * d);
  box.upper.resize(spec_.n * d);
  for (std::size_t j = 0; j < d; ++j) {
    const Interval s = spec_.marginals[j].support();
    for (std::size_t i = 0; i < spec_.n; ++i) {
      box.lower[i * d + j] = s.lo;
      box.upper[i * d + j] = s.hi;
    }
  }
  return box;
}

std::vector<PenaltyResult> DiscreteObjective::penalty_terms(std::span<const double> positions) const {
  const std::size_t d = spec_.dimension();
  const std::size_t n = spec_.n;
  if (positions.size() != n * d) throw DomainError("objective: positions must have N * D entries");
  std::vector<PenaltyResult> out(d);
  for_each_marginal(d, options_.threads, [&](std::size_t j) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = positions[i * d + j];
    if (spec_.mode == Mode::full) {
      out[j] = balanced_[j].evaluate(z, true);
    } else {
      out[j] = partial_value_grad(spec_.marginals[j], z, spec_.mass, options_.partial);
    }
  });
  return out;
}

ObjectiveEvaluation DiscreteObjective::evaluate(double lambda, std::span<const double> positions) const {
  const std::size_t d = spec_.dimension();
  const std::size_t n = spec_.n;
  if (positions.size() != n * d) throw DomainError("objective: positions must have N * D entries");
  for (double v : positions) {
    if (!std::isfinite(v)) throw DomainError("objective: non-finite particle coordinate");
  }
  const double s = static_cast<double>(spec_.sense);

  ObjectiveEvaluation ev;
  ev.costs.resize(n);
  std::vector<double> signed_costs(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      ev.costs[i] = spec_.cost(positions.subspan(i * d, d));
    } catch (const CostDomainError& e) {
      throw CostDomainError(e.what(), static_cast<std::ptrdiff_t>(i));
    }
    signed_costs[i] = s * ev.costs[i];
  }
  if (spec_.mode == Mode::full) {
    RiskEvaluation risk = risk_value_and_weights(bins_, signed_costs);
    ev.risk_term = risk.value;
    ev.weights = std::move(risk.weights);
  } else {
    ev.weights = bins_.p;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += signed_costs[i];
    ev.risk_term = acc / static_cast<double>(n);
  }

  ev.grad.assign(n * d, 0.0);
  std::vector<double> cg(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (ev.weights[i] == 0.0) continue;
    spec_.cost.gradient(positions.subspan(i * d, d), cg);
    for (std::size_t j = 0; j < d; ++j) ev.grad[i * d + j] = -ev.weights[i] * s * cg[j];
  }

  ev.penalties.assign(d, 0.0);
  double penalty_sum = 0.0;
  std::vector<PenaltyResult> terms(d);
  for_each_marginal(d, options_.threads, [&](std::size_t j) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = positions[i * d + j];
    if (spec_.mode == Mode::full) {
      terms[j] = balanced_[j].evaluate(z, false);
    } else {
      terms[j] = partial_value_grad(spec_.marginals[j], z, spec_.mass, options_.partial);
    }
  });
  for (std::size_t j = 0; j < d; ++j) {
    ev.penalties[j] = terms[j].value;
    penalty_sum += terms[j].value;
    for (std::size_t i = 0; i < n; ++i) ev.grad[i * d + j] += lambda * terms[j].grad[i];
  }
  ev.value = -ev.risk_term + lambda * penalty_sum;
  return ev;
}

double DiscreteObjective::value_grad(double lambda, std::span<const double> positions, std::span<double> grad,
                                     std::vector<double>* penalties) const {
  ObjectiveEvaluation ev;
  try {
    ev = evaluate(lambda, positions);
  } catch (const CostDomainError&) {
    return std::numeric_limits<double>::infinity();
  }
  std::copy(ev.grad.begin(), ev.grad.end(), grad.begin());
  if (penalties) *penalties = std::move(ev.penalties);
  return ev.value;
}

ObjectiveEvaluation objective_value_grad(const ProblemSpec& spec, double lambda, const ParticleCloud& cloud,
                                         const SolverOptions& options) {
  if (cloud.n != spec.n || cloud.dim != spec.dimension()) throw DomainError("objective: cloud shape mismatch");
  DiscreteObjective obj(spec, options);
  return obj.evaluate(lambda, cloud.positions);
}

SolveResult minimize(const ProblemSpec& spec, const Schedule& schedule, ParticleCloud init,
                     const SolverOptions& options) {
  schedule.validate();
  DiscreteObjective obj(spec, options);
  if (init.n != spec.n || init.dim != spec.dimension()) throw DomainError("minimize: initial cloud shape mismatch");

  const Box box = obj.support_box();
  const Box* box_ptr = options.box_constraints ? &box : nullptr;

  SolveResult result;
  result.cloud = std::move(init);
  result.cloud.mass_per_point = (spec.mode == Mode::partial ? spec.mass : 1.0) / static_cast<double>(spec.n);

  // penalties of recently evaluated points, matched by value to accepted iterates
  struct Seen {
    double value;
    std::vector<double> penalties;
  };
  std::vector<Seen> recent;

  int failures = 0;
  for (double lambda : schedule.lambdas) {
    recent.clear();
    Objective f = [&](std::span<const double> x, std::span<double> g) {
      std::vector<double> pen;
      const double v = obj.value_grad(lambda, x, g, &pen);
      if (recent.size() >= 64) recent.erase(recent.begin());
      recent.push_back({v, std::move(pen)});
      return v;
    };
    auto on_iter = [&](const LbfgsIterate& it) {
      TraceRecord rec{lambda, it.iteration, it.value, it.grad_norm, {}};
      for (auto r = recent.rbegin(); r != recent.rend(); ++r) {
        if (r->value == it.value) {
          rec.penalties = r->penalties;
          break;
        }
      }
      if (options.on_trace) options.on_trace(rec);
      result.trace.push_back(std::move(rec));
    };
    LbfgsResult lr = lbfgs_minimize(f, result.cloud.positions, options.lbfgs, box_ptr, on_iter);
    if (lr.status == LbfgsStatus::line_search_failure) ++failures;
    result.cloud.positions = std::move(lr.x);

    StageRecord stage;
    stage.lambda = lambda;
    stage.value = lr.value;
    stage.grad_norm = lr.grad_norm;
    stage.iterations = lr.iterations;
    stage.evaluations = lr.evaluations;
    stage.status = lr.status;
    try {
      ObjectiveEvaluation ev = obj.evaluate(lambda, result.cloud.positions);
      stage.risk_term = ev.risk_term;
      stage.penalties = std::move(ev.penalties);
    } catch (const CostDomainError&) {
      stage.risk_term = std::numeric_limits<double>::quiet_NaN();
    }
    if (options.on_stage) options.on_stage(stage, result.cloud);
    result.stages.push_back(std::move(stage));
  }
  if (failures == static_cast<int>(schedule.lambdas.size())) {
    throw ConvergenceError("minimize: line search failed at every lambda", result.stages.back().grad_norm);
  }
  return result;
}

ParticleCloud init_cloud(const ProblemSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t d = spec.dimension();
  ParticleCloud cloud(spec.n, d, (spec.mode == Mode::partial ? spec.mass : 1.0) / static_cast<double>(spec.n));
  cloud.seed = seed;
  std::mt19937_64 gen(seed);
  std::vector<Interval> supports;
  for (const auto& rho : spec.marginals) supports.push_back(rho.support());
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      cloud.at(i, j) = supports[j].lo + u * supports[j].width();
    }
  }
  return cloud;
}

}  // namespace lagrisk
