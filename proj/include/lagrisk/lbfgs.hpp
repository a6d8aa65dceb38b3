#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace lagrisk {

struct LbfgsOptions {
  std::size_t memory = 10;
  double c1 = 1e-4;  ///< sufficient decrease
  double c2 = 0.9;   ///< curvature
  /// Stop when ||projected grad||_inf <= gtol * max(1, |f|).
  double gtol = 1e-8;
  /// Stop when the relative decrease of one iteration drops below ftol (0 disables).
  double ftol = 2.2e-9;
  int max_iters = 2000;
  int max_linesearch = 40;
};

enum class LbfgsStatus { converged_gtol, converged_ftol, max_iterations, line_search_failure };

[[nodiscard]] std::string_view to_string(LbfgsStatus status);

struct LbfgsIterate {
  int iteration = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::max_iterations;
};

/// f(x) with its gradient written into `grad`. Returning +inf marks x as
/// infeasible; the line search then backtracks.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Componentwise bounds lower <= x <= upper (entries may be infinite).
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Limited-memory BFGS with a strong Wolfe line search. With a box, trial points
/// are projected onto it along the search path and variables held at a bound by
/// the gradient are frozen for that iteration.
[[nodiscard]] LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double> x0, const LbfgsOptions& options = {},
                                         const Box* box = nullptr,
                                         const std::function<void(const LbfgsIterate&)>& on_iteration = {});

}  // namespace lagrisk
