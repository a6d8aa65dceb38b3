#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lagrisk/costs.hpp"
#include "lagrisk/lbfgs.hpp"
#include "lagrisk/measures1d.hpp"
#include "lagrisk/sdot1d.hpp"
#include "lagrisk/spectral.hpp"

namespace lagrisk {

enum class Mode { full, partial };

/// Discretized risk problem. Internally minimized as
///   full:    -R_alpha((s c)_# delta_Y) + lambda sum_j W_2(rho_j, pi^j_# delta_Y)^2
///   partial: -(1/N) sum_i s c(y_i) + lambda sum_j W_{2,max}(rho_j, m pi^j_# delta_Y)^2
/// with s = sense (+1 maximizes the risk of c, -1 minimizes the transport cost).
struct ProblemSpec {
  std::vector<Density1D> marginals;
  CostFunction cost = CostFunction::linear_sum();
  SpectralFunction spectral = SpectralFunction::constant();
  Mode mode = Mode::full;
  double mass = 1.0;  ///< active mass m in partial mode
  std::size_t n = 0;
  int sense = 1;

  [[nodiscard]] std::size_t dimension() const { return marginals.size(); }
  /// Throws DomainError when the fields are inconsistent.
  void validate() const;
};

/// N points in R^D, row-major.
struct ParticleCloud {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> positions;
  double mass_per_point = 0.0;
  std::uint64_t seed = 0;

  ParticleCloud() = default;
  ParticleCloud(std::size_t n_points, std::size_t dimension, double point_mass = 0.0);

  [[nodiscard]] std::span<double> point(std::size_t i) { return {positions.data() + i * dim, dim}; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const { return {positions.data() + i * dim, dim}; }
  [[nodiscard]] double& at(std::size_t i, std::size_t j) { return positions[i * dim + j]; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return positions[i * dim + j]; }
  [[nodiscard]] std::vector<double> column(std::size_t j) const;
};

/// Quantization proxy u_N driving the automatic penalty rule lambda_N = u_N^{-(p - beta)}.
struct RateModel {
  enum class Proxy { tau, h };
  double p = 2.0;
  double beta = 1.0;
  double d = 1.0;  ///< box dimension of the optimal support (tau proxy)
  Proxy proxy = Proxy::h;

  void validate() const;
  /// tau_{p,d}(N) = N^{-1/max(p,d)} (d != p) or (log N)^{1/d} N^{-1/d} (d = p).
  [[nodiscard]] double tau(std::size_t n) const;
  /// h_N = max_j e_{2,N}(rho_j).
  [[nodiscard]] static double h(std::size_t n, std::span<const Density1D> marginals);
  [[nodiscard]] double lambda(std::size_t n, std::span<const Density1D> marginals) const;
};

/// Strictly increasing positive sequence of penalty coefficients for warm-started continuation.
struct Schedule {
  std::vector<double> lambdas;

  /// {10^k : k = k_min, ..., k_max}
  static Schedule powers_of_ten(int k_min, int k_max);
  /// Powers of ten from 10^k_min below lambda_N, then lambda_N itself.
  static Schedule from_rate(const RateModel& rule, std::size_t n, std::span<const Density1D> marginals,
                            int k_min = -2);
  void validate() const;
};

struct TraceRecord;
struct StageRecord;

struct SolverOptions {
  LbfgsOptions lbfgs;
  PartialOptions partial;
  /// Keep iterates inside the product of marginal supports.
  bool box_constraints = true;
  unsigned threads = 1;
  /// Called for every accepted iterate and after every lambda stage.
  std::function<void(const TraceRecord&)> on_trace;
  std::function<void(const StageRecord&, const ParticleCloud&)> on_stage;
};

struct ObjectiveEvaluation {
  double value = 0.0;
  std::vector<double> grad;  ///< N x D row-major
  /// Sum_i w_i s c(y_i): the risk (full) or mean cost (partial) of s c.
  double risk_term = 0.0;
  /// W_2^2 (full) or W_{2,max}^2 (partial) per marginal.
  std::vector<double> penalties;
  /// c(y_i), without the sense sign.
  std::vector<double> costs;
  /// w_i; N w_i is the auxiliary variable of law alpha_# Leb(0,1) paired with c(y_i).
  std::vector<double> weights;
};

/// Objective of the discretized problem with cached per-marginal quantile blocks.
class DiscreteObjective {
 public:
  DiscreteObjective(ProblemSpec spec, SolverOptions options = {});

  [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
  [[nodiscard]] const SolverOptions& options() const { return options_; }

  /// Throws CostDomainError (with particle index) outside the cost domain.
  [[nodiscard]] ObjectiveEvaluation evaluate(double lambda, std::span<const double> positions) const;
  /// Value with gradient written to `grad`; +inf when a particle leaves the cost domain.
  double value_grad(double lambda, std::span<const double> positions, std::span<double> grad,
                    std::vector<double>* penalties = nullptr) const;
  /// Per-marginal transport solutions (cells, values) at `positions`.
  [[nodiscard]] std::vector<PenaltyResult> penalty_terms(std::span<const double> positions) const;
  [[nodiscard]] Box support_box() const;

 private:
  ProblemSpec spec_;
  SolverOptions options_;
  BinWeights bins_;
  std::vector<BalancedPenalty> balanced_;
};

[[nodiscard]] ObjectiveEvaluation objective_value_grad(const ProblemSpec& spec, double lambda,
                                                       const ParticleCloud& cloud,
                                                       const SolverOptions& options = {});

struct TraceRecord {
  double lambda = 0.0;
  int iteration = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  std::vector<double> penalties;
};

struct StageRecord {
  double lambda = 0.0;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::max_iterations;
  double risk_term = 0.0;
  std::vector<double> penalties;
};

struct SolveResult {
  ParticleCloud cloud;
  std::vector<StageRecord> stages;
  std::vector<TraceRecord> trace;
};

/// Penalty continuation: one L-BFGS run per lambda, each warm-started from the
/// previous solution. A stage ending in a line-search failure is recorded and
/// the best point so far carried over; failure of every stage throws.
[[nodiscard]] SolveResult minimize(const ProblemSpec& spec, const Schedule& schedule, ParticleCloud init,
                                   const SolverOptions& options = {});

/// N i.i.d. points uniform on the product of the marginal supports. Uses
/// std::mt19937_64 seeded with `seed`; each double is (u64 >> 11) * 2^-53, drawn
/// point by point and axis by axis, so clouds are identical across platforms.
[[nodiscard]] ParticleCloud init_cloud(const ProblemSpec& spec, std::uint64_t seed);

}  // namespace lagrisk
