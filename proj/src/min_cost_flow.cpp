#include "lagrisk/min_cost_flow.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>

#include "lagrisk/errors.hpp"

namespace lagrisk {

MinCostFlow::MinCostFlow(std::size_t nodes) : graph_(nodes) {}

std::size_t MinCostFlow::add_edge(std::size_t from, std::size_t to, std::int64_t capacity, std::int64_t cost) {
  if (from >= graph_.size() || to >= graph_.size()) throw DomainError("min cost flow: node out of range");
  if (capacity < 0 || cost < 0) throw DomainError("min cost flow: negative capacity or cost");
  graph_[from].push_back({to, graph_[to].size() + (from == to ? 1 : 0), capacity, cost});
  graph_[to].push_back({from, graph_[from].size() - 1, 0, -cost});
  handles_.emplace_back(from, graph_[from].size() - 1);
  initial_cap_.push_back(capacity);
  return handles_.size() - 1;
}

MinCostFlow::Result MinCostFlow::solve(std::size_t s, std::size_t t, std::int64_t max_flow) {
  constexpr std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
  const std::size_t n = graph_.size();
  std::vector<std::int64_t> potential(n, 0), dist(n);
  std::vector<int> level(n);
  std::vector<std::size_t> next_arc(n);
  Result res;
  using Item = std::pair<std::int64_t, std::size_t>;
  while (res.flow < max_flow) {
    std::fill(dist.begin(), dist.end(), inf);
    dist[s] = 0;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.emplace(0, s);
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      if (u == t) break;
      for (const Edge& e : graph_[u]) {
        if (e.cap <= 0) continue;
        const std::int64_t nd = d + e.cost + potential[u] - potential[e.to];
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          pq.emplace(nd, e.to);
        }
      }
    }
    if (dist[t] == inf) break;
    // nodes settled after t move by dist[t], keeping reduced costs nonnegative
    for (std::size_t v = 0; v < n; ++v) potential[v] += std::min(dist[v], dist[t]);
    // Blocking flows on the arcs of zero reduced cost, so that one Dijkstra
    // serves every shortest augmenting path of the current length.
    auto admissible = [&](std::size_t u, const Edge& e) {
      return e.cap > 0 && e.cost + potential[u] - potential[e.to] == 0;
    };
    for (;;) {
      std::fill(level.begin(), level.end(), -1);
      level[s] = 0;
      std::queue<std::size_t> bfs;
      bfs.push(s);
      while (!bfs.empty()) {
        const std::size_t u = bfs.front();
        bfs.pop();
        for (const Edge& e : graph_[u]) {
          if (level[e.to] < 0 && admissible(u, e)) {
            level[e.to] = level[u] + 1;
            bfs.push(e.to);
          }
        }
      }
      if (level[t] < 0) break;
      std::fill(next_arc.begin(), next_arc.end(), 0);
      std::function<std::int64_t(std::size_t, std::int64_t)> augment = [&](std::size_t u, std::int64_t limit) {
        if (u == t) return limit;
        for (std::size_t& k = next_arc[u]; k < graph_[u].size(); ++k) {
          Edge& e = graph_[u][k];
          if (level[e.to] != level[u] + 1 || !admissible(u, e)) continue;
          const std::int64_t pushed = augment(e.to, std::min(limit, e.cap));
          if (pushed > 0) {
            e.cap -= pushed;
            graph_[e.to][e.rev].cap += pushed;
            res.cost += pushed * e.cost;
            return pushed;
          }
        }
        return std::int64_t{0};
      };
      while (res.flow < max_flow) {
        const std::int64_t pushed = augment(s, max_flow - res.flow);
        if (pushed == 0) break;
        res.flow += pushed;
      }
      if (res.flow >= max_flow) break;
    }
  }
  return res;
}

std::int64_t MinCostFlow::flow(std::size_t edge) const {
  const auto [u, k] = handles_.at(edge);
  return initial_cap_[edge] - graph_[u][k].cap;
}

}  // namespace lagrisk
