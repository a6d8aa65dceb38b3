#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lagrisk {

/// Primal-dual min-cost flow: Dijkstra on reduced costs, then blocking flows
/// on the zero reduced-cost arcs. Integer capacities and costs; costs must be
/// nonnegative.
class MinCostFlow {
 public:
  explicit MinCostFlow(std::size_t nodes);

  /// Returns an edge id usable with flow().
  std::size_t add_edge(std::size_t from, std::size_t to, std::int64_t capacity, std::int64_t cost);

  struct Result {
    std::int64_t flow = 0;
    std::int64_t cost = 0;
  };
  /// Pushes up to `max_flow` units from s to t at minimum cost.
  Result solve(std::size_t s, std::size_t t, std::int64_t max_flow);

  [[nodiscard]] std::int64_t flow(std::size_t edge) const;

 private:
  struct Edge {
    std::size_t to;
    std::size_t rev;
    std::int64_t cap;
    std::int64_t cost;
  };
  std::vector<std::vector<Edge>> graph_;
  std::vector<std::pair<std::size_t, std::size_t>> handles_;
  std::vector<std::int64_t> initial_cap_;
};

}  // namespace lagrisk
