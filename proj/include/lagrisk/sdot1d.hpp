#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lagrisk/measures1d.hpp"

namespace lagrisk {

/// Transport cell of one Dirac mass. In partial mode the cell is the restricted
/// Laguerre cell Lag_i \cap B(z_i, sqrt(psi_i)); in balanced mode psi is unused.
struct Cell {
  std::size_t index = 0;  ///< position of the atom in the caller's array
  double l = 0.0;
  double r = 0.0;
  double mass = 0.0;
  double barycenter = 0.0;
  double psi = 0.0;
};

struct CellDecomposition {
  /// order[k] is the caller index of the k-th smallest atom (stable).
  std::vector<std::size_t> order;
  /// cells[k] belongs to atom order[k]; cells are ordered left to right.
  std::vector<Cell> cells;
  bool partial = false;
  double mass_per_atom = 0.0;
  /// max_i |rho(cell_i) - mass_per_atom|
  double kkt_residual = 0.0;
  /// Number of merge/split sweeps the partial dual solver used.
  int sweeps = 0;
};

struct PenaltyResult {
  double value = 0.0;
  std::vector<double> grad;
  CellDecomposition cells;
};

/// W_2(rho, delta_Z)^2 for a density with N equal-mass quantile blocks cached.
/// Blocks only depend on N, so repeated evaluations cost one sort.
class BalancedPenalty {
 public:
  BalancedPenalty(Density1D rho, std::size_t n);

  [[nodiscard]] std::size_t size() const { return blocks_.size(); }
  [[nodiscard]] const Density1D& density() const { return rho_; }

  /// Value and gradient; `cells` is filled only when requested.
  [[nodiscard]] PenaltyResult evaluate(std::span<const double> z, bool with_cells = true) const;

  struct Block {
    double l = 0.0;
    double r = 0.0;
    double mass = 0.0;
    double barycenter = 0.0;
    double variance = 0.0;  ///< \int_block (x - barycenter)^2 d rho
  };
  [[nodiscard]] const std::vector<Block>& blocks() const { return blocks_; }

 private:
  Density1D rho_;
  std::vector<Block> blocks_;
};

[[nodiscard]] PenaltyResult balanced_value_grad(const Density1D& rho, std::span<const double> z);

struct PartialOptions {
  double kkt_tol = 1e-9;
  int max_dual_iters = 200;
};

/// W_{2,max}(rho, m delta_Z)^2 with every atom carrying mass m/N. Solves the
/// concave dual over psi through ordered chains of contiguous cells.
[[nodiscard]] PenaltyResult partial_value_grad(const Density1D& rho, std::span<const double> z, double m,
                                               const PartialOptions& options = {});

}  // namespace lagrisk
