// Acceptance gates 1-9. Each criterion prints one PASS/FAIL line with the
// measured numbers and its wall time; the process exits nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lagrisk/costs.hpp"
#include "lagrisk/experiment.hpp"
#include "lagrisk/oracles.hpp"
#include "lagrisk/sdot1d.hpp"
#include "lagrisk/solver.hpp"
#include "lagrisk/spectral.hpp"
#include "test_support.hpp"

using namespace lagrisk;
namespace ts = lagrisk::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string out_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lagrisk_acceptance" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// W_2(rho, delta_Y)^2 through the quantile coupling, by Simpson on each block.
double quantile_w2_squared(const Density1D& rho, std::vector<double> y) {
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(y.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double t0 = static_cast<double>(k) / n, t1 = static_cast<double>(k + 1) / n;
    acc += ts::simpson(
        [&](double t) {
          const double d = rho.quantile_clamped(t) - y[k];
          return d * d;
        },
        t0, t1, 1e-12, 30);
  }
  return acc;
}

// Random cloud inside the supports with coordinates and costs kept apart.
ParticleCloud separated_cloud(const ProblemSpec& spec, std::mt19937_64& gen) {
  const std::size_t n = spec.n, d = spec.dimension();
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (;;) {
    ParticleCloud c(n, d, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const Interval s = spec.marginals[j].support();
        c.at(i, j) = s.lo + s.width() * u(gen);
      }
    }
    bool ok = true;
    for (std::size_t j = 0; j < d && ok; ++j) {
      auto col = c.column(j);
      std::sort(col.begin(), col.end());
      for (std::size_t i = 1; i < n; ++i) ok = ok && col[i] - col[i - 1] > 1e-3;
    }
    std::vector<double> costs(n);
    for (std::size_t i = 0; i < n; ++i) costs[i] = spec.cost(c.point(i));
    std::sort(costs.begin(), costs.end());
    for (std::size_t i = 1; i < n && ok; ++i) ok = costs[i] - costs[i - 1] > 1e-3;
    if (ok) return c;
  }
}

Outcome sdot_exactness() {
  Outcome o;
  const auto rho = Density1D::uniform(0, 1);
  const std::vector<double> zb{0.25, 0.75};
  const double balanced = balanced_value_grad(rho, zb).value;
  o.require(std::abs(balanced - 1.0 / 48.0) <= 1e-12, "balanced " + fmt("%.17g", balanced));

  const std::vector<double> zp{0.5};
  const auto partial = partial_value_grad(rho, zp, 0.5);
  const double psi = partial.cells.cells.at(0).psi;
  o.require(std::abs(partial.value - 1.0 / 96.0) <= 1e-10, "partial " + fmt("%.17g", partial.value));
  o.require(std::abs(psi - 0.0625) <= 1e-10, "psi " + fmt("%.17g", psi));

  const double flow_b = flow_partial_ot_oracle(rho, zb, 1.0, 2000);
  const double flow_p = flow_partial_ot_oracle(rho, zp, 0.5, 2000);
  const double rel_b = std::abs(flow_b - balanced) / balanced;
  const double rel_p = std::abs(flow_p - partial.value) / partial.value;
  o.require(rel_b <= 1e-3, "flow balanced rel " + fmt("%.2e", rel_b));
  o.require(rel_p <= 1e-3, "flow partial rel " + fmt("%.2e", rel_p));
  return o;
}

Outcome gradient_integrity() {
  Outcome o;
  std::mt19937_64 gen(20240602);
  const std::vector<CostFunction> costs{CostFunction::product(), CostFunction::squared_sum_surplus(),
                                        CostFunction::coulomb_regularized(), CostFunction::linear_sum()};
  const std::vector<SpectralFunction> alphas{SpectralFunction::constant(), SpectralFunction::linear(),
                                             SpectralFunction::cvar(0.4), SpectralFunction::quadratic_offset(0.1)};
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int configs = 0;
  for (Mode mode : {Mode::full, Mode::partial}) {
    for (int k = 0; k < 20; ++k) {
      ProblemSpec spec;
      const std::size_t d = (k % 2 == 0) ? 2 : 3;
      spec.n = (k / 2) % 2 == 0 ? 5 : 20;
      for (std::size_t j = 0; j < d; ++j) {
        const double lo = -1.0 + u(gen), w = 0.5 + 2.0 * u(gen);
        switch (pick(gen)) {
          case 0: spec.marginals.push_back(Density1D::uniform(lo, lo + w)); break;
          case 1: spec.marginals.push_back(Density1D::triangular(lo, lo + w * (0.2 + 0.6 * u(gen)), lo + w)); break;
          case 2: spec.marginals.push_back(Density1D::wigner_semicircle(lo + 0.5 * w, 0.5 * w)); break;
          default: spec.marginals.push_back(Density1D::truncated_normal(lo + 0.5 * w, 0.3 * w, lo, lo + w)); break;
        }
      }
      spec.cost = costs[pick(gen)];
      spec.mode = mode;
      if (mode == Mode::partial) {
        spec.mass = 0.3 + 0.6 * u(gen);
        spec.spectral = SpectralFunction::cvar(spec.mass);
        spec.sense = u(gen) < 0.5 ? 1 : -1;
      } else {
        spec.spectral = alphas[pick(gen)];
      }
      const double lambda = std::pow(10.0, -1.0 + 2.0 * u(gen));
      const auto cloud = separated_cloud(spec, gen);
      const DiscreteObjective obj(spec);
      const auto e = obj.evaluate(lambda, cloud.positions);
      const auto fd = ts::fd_gradient([&](const std::vector<double>& x) { return obj.evaluate(lambda, x).value; },
                                      cloud.positions, 1e-6);
      const double rel = ts::max_abs_diff(e.grad, fd) / std::max(ts::max_abs(e.grad), 1e-300);
      worst = std::max(worst, rel);
      ++configs;
    }
  }
  o.require(worst <= 1e-5, std::to_string(configs) + " configurations, worst rel err " + fmt("%.2e", worst));
  return o;
}

Outcome rearrangement() {
  Outcome o;
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(size(gen));
    SpectralFunction alpha = SpectralFunction::constant();
    switch (kind(gen)) {
      case 0: break;
      case 1: alpha = SpectralFunction::cvar(0.05 + 0.95 * u(gen)); break;
      case 2: alpha = SpectralFunction::linear(); break;
      case 3: alpha = SpectralFunction::quadratic_offset(0.5 * u(gen)); break;
      default: {
        const double b = 0.2 + 0.6 * u(gen), v0 = 0.5 * u(gen);
        // nondecreasing with unit integral: v0 on (0, b), v1 on (b, 1)
        alpha = SpectralFunction::piecewise_constant({0.0, b, 1.0}, {v0, (1.0 - v0 * b) / (1.0 - b)});
        break;
      }
    }
    std::vector<double> values(n);
    // integers half the time so that ties occur
    const bool ties = trial % 2 == 0;
    for (auto& v : values) v = ties ? std::floor(4.0 * u(gen)) : -3.0 + 6.0 * u(gen);
    const auto bins = bin_weights(alpha, n);
    const double value = risk_value_and_weights(bins, values).value;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = -std::numeric_limits<double>::infinity();
    do {
      best = std::max(best, ts::exact_dot(bins.p, values, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (value != best) ++mismatches;
  }
  o.require(mismatches == 0, "200 instances, " + std::to_string(mismatches) + " mismatches");
  return o;
}

ExperimentConfig rates_config(const std::string& schedule_json, const std::string& name) {
  return parse_config(R"({"preset": "rates", "output": ")" + out_dir(name) + "\"" + schedule_json + "}");
}

std::string describe_rows(const RateStudy& s) {
  std::string text;
  for (const auto& r : s.rows) text += (text.empty() ? "" : ",") + fmt("%.3g", r.abs_error);
  return text;
}

Outcome supermodular_recovery() {
  Outcome o;
  const auto cfg = rates_config("", "rates_rule");
  const auto study = run_rates(cfg);
  bool decreasing = true;
  for (std::size_t k = 1; k < study.rows.size(); ++k) decreasing = decreasing && study.rows[k].abs_error < study.rows[k - 1].abs_error;
  o.require(study.rows.size() == 6, "N=25..800 x " + std::to_string(cfg.rate_seeds.size()) + " seeds");
  o.require(decreasing, "errors decrease [" + describe_rows(study) + "]");
  o.require(study.fit.slope >= -1.4 && study.fit.slope <= -0.5, "slope " + fmt("%.3f", study.fit.slope));

  // Fixed schedule 10^-2..10^4 for every N; reported only, see README.
  const auto fixed = run_rates(rates_config(R"(, "schedule": {"k_min": -2, "k_max": 4})", "rates_fixed"));
  std::printf("INFO criterion 4: fixed schedule 10^-2..10^4 gives slope %.3f, errors [%s]\n", fixed.fit.slope,
              describe_rows(fixed).c_str());
  return o;
}

Outcome quantization_rates() {
  Outcome o;
  double worst = 0.0;
  for (std::size_t n = 2; n <= 256; ++n) {
    const double e = quantize_1d(Density1D::uniform(0, 1), n).error;
    worst = std::max(worst, std::abs(e * 2.0 * std::sqrt(3.0) * static_cast<double>(n) - 1.0));
  }
  o.require(worst <= 1e-9, "uniform max |e 2 sqrt3 N - 1| " + fmt("%.2e", worst));
  for (double a : {1.5, 2.0, 4.0}) {
    std::vector<double> ns, errs;
    for (std::size_t n = 64; n <= 4096; n *= 2) {
      ns.push_back(static_cast<double>(n));
      errs.push_back(quantize_1d(Density1D::power_law(a), n).error);
    }
    const double slope = -fit_rate(ns, errs).slope;
    const double expected = std::min(0.5 + 1.0 / a, 1.0);
    o.require(std::abs(slope - expected) <= 0.1,
              "power law a=" + fmt("%g", a) + " rate " + fmt("%.3f", slope) + " vs " + fmt("%.3f", expected));
  }
  return o;
}

Outcome squared_sum() {
  Outcome o;
  const auto cfg = parse_config(R"({"preset": "squared_sum", "problem": {"n": 1000}, "output": ")" +
                                out_dir("squared_sum") + "\"}");
  const auto report = run_solve(cfg);
  const auto& cloud = report.result.cloud;
  double dev = 0.0;
  for (std::size_t i = 0; i < cloud.n; ++i) {
    const auto p = cloud.point(i);
    const double s = std::accumulate(p.begin(), p.end(), 0.0) - 2.0;
    dev += s * s;
  }
  dev /= static_cast<double>(cloud.n);
  o.require(dev <= 0.01, "mean |x1+x2+x3-2|^2 " + fmt("%.3e", dev));
  for (std::size_t j = 0; j < cloud.dim; ++j) {
    const double w2 = std::sqrt(quantile_w2_squared(cfg.problem.marginals[j], cloud.column(j)));
    o.require(w2 <= 0.02, "W2 marginal " + std::to_string(j + 1) + " " + fmt("%.3e", w2));
  }
  return o;
}

Outcome translated_pyramid() {
  Outcome o;
  const auto cfg = parse_config(R"({"preset": "partial_barycenter", "variant": "translated_pyramid", "output": ")" +
                                out_dir("translated_pyramid") + "\"}");
  const auto& rho = cfg.problem.marginals;
  const Interval s0 = rho[0].support(), s1 = rho[1].support();
  const double lo = std::max(s0.lo, s1.lo), hi = std::min(s0.hi, s1.hi);
  // the min-density has kinks at the modes and the crossing; split there
  std::vector<double> cuts{lo, hi};
  for (const auto& r : rho) {
    const auto par = r.parameters();
    for (double x : par) if (x > lo && x < hi) cuts.push_back(x);
  }
  std::sort(cuts.begin(), cuts.end());
  const auto gap = [&](double x) { return rho[0].pdf(x) - rho[1].pdf(x); };
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double l = cuts[k], r = cuts[k + 1];
    if (gap(l) * gap(r) < 0.0) {
      for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (l + r);
        (gap(l) * gap(m) <= 0.0 ? r : l) = m;
      }
      cuts.push_back(0.5 * (l + r));
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double overlap = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    overlap += ts::simpson([&](double x) { return std::min(rho[0].pdf(x), rho[1].pdf(x)); }, cuts[k], cuts[k + 1]);
  }
  o.require(std::abs(cfg.problem.mass - overlap) <= 1e-3,
            "m " + fmt("%.4f", cfg.problem.mass) + " vs overlap " + fmt("%.6f", overlap));

  const auto report = run_solve(cfg);
  const auto& cloud = report.result.cloud;
  double mean_cost = 0.0;
  for (std::size_t i = 0; i < cloud.n; ++i) mean_cost += cfg.problem.cost(cloud.point(i));
  mean_cost /= static_cast<double>(cloud.n);
  const double transport = cfg.problem.mass * mean_cost;
  o.require(transport <= 0.01, "transport cost " + fmt("%.3e", transport));
  double residual = 0.0;
  for (std::size_t j = 0; j < cloud.dim; ++j) {
    const auto col = cloud.column(j);
    residual = std::max(residual, std::sqrt(partial_value_grad(rho[j], col, cfg.problem.mass).value));
  }
  o.require(residual <= 5e-3, "W2max residual " + fmt("%.3e", residual));
  return o;
}

Outcome partial_consistency() {
  Outcome o;
  std::mt19937_64 gen(88);
  double worst_value = 0.0, worst_grad = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    ProblemSpec full;
    full.marginals = {Density1D::triangular(0, 0.3, 1), Density1D::uniform(-1, 2), Density1D::wigner_semicircle(0, 1)};
    full.cost = trial % 2 == 0 ? CostFunction::product() : CostFunction::squared_sum_surplus();
    full.spectral = SpectralFunction::constant();
    full.n = 4 + static_cast<std::size_t>(trial);
    auto partial = full;
    partial.mode = Mode::partial;
    partial.mass = 1.0;
    const auto cloud = separated_cloud(full, gen);
    const auto a = objective_value_grad(full, 2.5, cloud);
    const auto b = objective_value_grad(partial, 2.5, cloud);
    worst_value = std::max(worst_value, std::abs(a.value - b.value));
    worst_grad = std::max(worst_grad, ts::max_abs_diff(a.grad, b.grad));
  }
  o.require(worst_value <= 1e-10, "value diff " + fmt("%.2e", worst_value));
  o.require(worst_grad <= 1e-10, "gradient diff " + fmt("%.2e", worst_grad));
  return o;
}

// Average ranks, ties sharing the mean rank.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size();) {
    std::size_t e = k;
    while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[k]]) ++e;
    for (std::size_t q = k; q <= e; ++q) r[idx[q]] = 0.5 * static_cast<double>(k + e);
    k = e + 1;
  }
  return r;
}

Outcome river() {
  Outcome o;
  const auto cfg = parse_config(R"({"preset": "river", "problem": {"n": 2000},
                                    "schedule": {"k_min": -2, "k_max": 2}, "output": ")" +
                                out_dir("river") + "\"}");
  const auto report = run_solve(cfg);
  const auto& cloud = report.result.cloud;
  std::vector<double> costs(cloud.n);
  for (std::size_t i = 0; i < cloud.n; ++i) costs[i] = cfg.problem.cost(cloud.point(i));
  const double risk = risk_value_and_weights(cfg.problem.spectral, costs).value;
  const double ref = reference_value(cfg.problem.cost, cfg.problem.spectral, cfg.problem.marginals,
                                     river_compatibility_flips());
  const double rel = std::abs(risk - ref) / std::abs(ref);
  o.require(rel <= 0.05, "risk " + fmt("%.6g", risk) + " vs reference " + fmt("%.6g", ref) + " rel " +
                             fmt("%.2e", rel));
  const auto rq = ranks(cloud.column(0));
  const auto rc = ranks(costs);
  const double mq = std::accumulate(rq.begin(), rq.end(), 0.0) / rq.size();
  const double mc = std::accumulate(rc.begin(), rc.end(), 0.0) / rc.size();
  double sqc = 0.0, sqq = 0.0, scc = 0.0;
  for (std::size_t i = 0; i < rq.size(); ++i) {
    sqc += (rq[i] - mq) * (rc[i] - mc);
    sqq += (rq[i] - mq) * (rq[i] - mq);
    scc += (rc[i] - mc) * (rc[i] - mc);
  }
  const double corr = sqc / std::sqrt(sqq * scc);
  o.require(corr > 0.0, "rank correlation Q/cost " + fmt("%.3f", corr));
  return o;
}

struct Criterion {
  int id;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gates"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, 1.0, sdot_exactness},        {2, 30.0, gradient_integrity}, {3, 10.0, rearrangement},
      {4, 600.0, supermodular_recovery}, {5, 60.0, quantization_rates}, {6, 300.0, squared_sum},
      {7, 300.0, translated_pyramid},  {8, 1.0, partial_consistency},  {9, 600.0, river},
  };
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.budget_seconds, "runtime " + fmt("%.2f", secs) + " s < " + fmt("%g", c.budget_seconds) + " s");
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", c.id, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
