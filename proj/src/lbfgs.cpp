#include "lagrisk/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "lagrisk/errors.hpp"

namespace lagrisk {

std::string_view to_string(LbfgsStatus status) {
  switch (status) {
    case LbfgsStatus::converged_gtol: return "converged_gtol";
    case LbfgsStatus::converged_ftol: return "converged_ftol";
    case LbfgsStatus::max_iterations: return "max_iterations";
    case LbfgsStatus::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

struct Trial {
  double alpha = 0.0;
  double f = kInf;
  double slope = 0.0;  // g(x + alpha d) . d
  std::vector<double> x;
  std::vector<double> g;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const LbfgsOptions& opt, const Box* box, int& evals)
      : f_(f), opt_(opt), box_(box), evals_(evals) {}

  // Returns true on success; `best` then holds the accepted point.
  bool run(std::span<const double> x, double f0, std::span<const double> d, double slope0, double alpha0,
           Trial& best) {
    x_ = x;
    d_ = d;
    f0_ = f0;
    slope0_ = slope0;

    Trial prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.slope = slope0;
    double alpha = alpha0;
    for (int i = 0; i < opt_.max_linesearch; ++i) {
      Trial cur = evaluate(alpha);
      if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur, best);
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        best = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, best);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return false;
  }

 private:
  bool armijo(const Trial& t) const { return std::isfinite(t.f) && t.f <= f0_ + opt_.c1 * t.alpha * slope0_; }

  // Point on the projected path x + alpha d clipped to the box; the slope only
  // counts coordinates that still move.
  Trial evaluate(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x.resize(x_.size());
    t.g.assign(x_.size(), 0.0);
    std::vector<bool> moving(x_.size(), true);
    for (std::size_t i = 0; i < x_.size(); ++i) {
      double v = x_[i] + alpha * d_[i];
      if (box_ != nullptr && (v < box_->lower[i] || v > box_->upper[i])) {
        v = std::clamp(v, box_->lower[i], box_->upper[i]);
        moving[i] = false;
      }
      t.x[i] = v;
    }
    t.f = f_(t.x, t.g);
    ++evals_;
    if (std::isnan(t.f)) t.f = kInf;
    t.slope = 0.0;
    if (std::isfinite(t.f)) {
      for (std::size_t i = 0; i < x_.size(); ++i) {
        if (moving[i]) t.slope += t.g[i] * d_[i];
      }
    }
    return t;
  }

  // Nocedal & Wright, Algorithm 3.6. `lo` always satisfies sufficient decrease.
  bool zoom(Trial lo, Trial hi, Trial& best) {
    for (int i = 0; i < opt_.max_linesearch; ++i) {
      const double width = hi.alpha - lo.alpha;
      if (std::abs(width) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
      double alpha = 0.5 * (lo.alpha + hi.alpha);
      if (std::isfinite(hi.f) && std::isfinite(lo.f)) {
        // Cubic interpolation through (lo, hi), safeguarded to the middle 80%.
        const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.alpha - hi.alpha);
        const double disc = d1 * d1 - lo.slope * hi.slope;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), hi.alpha - lo.alpha);
          const double cand =
              hi.alpha - (hi.alpha - lo.alpha) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
          const double a = std::min(lo.alpha, hi.alpha);
          const double b = std::max(lo.alpha, hi.alpha);
          const double margin = 0.1 * (b - a);
          if (std::isfinite(cand) && cand > a + margin && cand < b - margin) alpha = cand;
        }
      }
      Trial cur = evaluate(alpha);
      if (!armijo(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
          best = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // Fall back on the best sufficient-decrease point found, if any.
    if (lo.alpha > 0.0 && armijo(lo)) {
      best = std::move(lo);
      return true;
    }
    return false;
  }

  const Objective& f_;
  const LbfgsOptions& opt_;
  const Box* box_;
  int& evals_;
  std::span<const double> x_;
  std::span<const double> d_;
  double f0_ = 0.0;
  double slope0_ = 0.0;
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double> x0, const LbfgsOptions& options, const Box* box,
                           const std::function<void(const LbfgsIterate&)>& on_iteration) {
  const std::size_t n = x0.size();
  if (box != nullptr) {
    if (box->lower.size() != n || box->upper.size() != n) throw DomainError("lbfgs: box size mismatch");
    for (std::size_t i = 0; i < n; ++i) x0[i] = std::clamp(x0[i], box->lower[i], box->upper[i]);
  }
  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n, 0.0);
  res.value = f(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) throw DomainError("lbfgs: objective is not finite at the starting point");

  auto at_lower = [&](std::size_t i) { return box != nullptr && res.x[i] <= box->lower[i]; };
  auto at_upper = [&](std::size_t i) { return box != nullptr && res.x[i] >= box->upper[i]; };

  std::deque<Pair> history;
  std::vector<double> pg(n), d(n), alpha_buf;
  LineSearch search(f, options, box, res.evaluations);
  bool fresh = true;
  double last_step = 0.0;
  res.status = LbfgsStatus::max_iterations;

  for (int iter = 0;; ++iter) {
    std::vector<bool> frozen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      frozen[i] = (at_lower(i) && g[i] > 0.0) || (at_upper(i) && g[i] < 0.0);
      pg[i] = frozen[i] ? 0.0 : g[i];
    }
    res.grad_norm = inf_norm(pg);
    if (on_iteration) on_iteration({iter, res.value, res.grad_norm, last_step});
    if (res.grad_norm <= options.gtol * std::max(1.0, std::abs(res.value))) {
      res.status = LbfgsStatus::converged_gtol;
      break;
    }
    if (iter >= options.max_iters) {
      res.status = LbfgsStatus::max_iterations;
      break;
    }

    // Two-loop recursion on the free variables.
    std::copy(pg.begin(), pg.end(), d.begin());
    alpha_buf.assign(history.size(), 0.0);
    for (std::size_t k = history.size(); k-- > 0;) {
      const Pair& p = history[k];
      alpha_buf[k] = p.rho * dot(p.s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha_buf[k] * p.y[i];
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (auto& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const Pair& p = history[k];
      const double beta = p.rho * dot(p.y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_buf[k] - beta) * p.s[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = -d[i];
      if (frozen[i] || (at_lower(i) && d[i] < 0.0) || (at_upper(i) && d[i] > 0.0)) d[i] = 0.0;
    }
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      history.clear();
      fresh = true;
      for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
      slope = dot(g, d);
    }

    const double alpha0 = fresh ? std::min(1.0, 1.0 / std::max(inf_norm(d), 1e-300)) : 1.0;

    Trial accepted;
    bool ok = search.run(res.x, res.value, d, slope, alpha0, accepted);
    if (!ok && !fresh) {
      // Retry once along the projected steepest descent direction.
      history.clear();
      fresh = true;
      for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
      slope = dot(g, d);
      ok = search.run(res.x, res.value, d, slope, std::min(1.0, 1.0 / std::max(inf_norm(d), 1e-300)), accepted);
    }
    if (!ok) {
      res.status = LbfgsStatus::line_search_failure;
      break;
    }

    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      p.s[i] = accepted.x[i] - res.x[i];
      p.y[i] = accepted.g[i] - g[i];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * dot(p.y, p.y) && sy > 0.0) {
      p.rho = 1.0 / sy;
      history.push_back(std::move(p));
      if (history.size() > options.memory) history.pop_front();
      fresh = false;
    }
    const double previous = res.value;
    res.x = std::move(accepted.x);
    g = std::move(accepted.g);
    res.value = accepted.f;
    res.iterations = iter + 1;
    last_step = accepted.alpha;
    if (options.ftol > 0.0 &&
        previous - res.value <= options.ftol * std::max({std::abs(previous), std::abs(res.value), 1.0})) {
      for (std::size_t i = 0; i < n; ++i) {
        const bool fr = (at_lower(i) && g[i] > 0.0) || (at_upper(i) && g[i] < 0.0);
        pg[i] = fr ? 0.0 : g[i];
      }
      res.grad_norm = inf_norm(pg);
      if (on_iteration) on_iteration({iter + 1, res.value, res.grad_norm, accepted.alpha});
      res.status = LbfgsStatus::converged_ftol;
      break;
    }
  }
  return res;
}

}  // namespace lagrisk
