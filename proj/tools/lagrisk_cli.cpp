#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lagrisk/errors.hpp"
#include "lagrisk/experiment.hpp"

using namespace lagrisk;

namespace {

struct Overrides {
  std::optional<long long> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  std::optional<double> kkt_tol;
  std::optional<double> gtol;
};

ExperimentConfig load_with(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  if (o.seed) {
    if (*o.seed < 0) throw ConfigError("--seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(*o.seed);
    if (cfg.rate_seeds.size() == 1) cfg.rate_seeds = {cfg.seed};
  }
  if (o.threads) cfg.solver.threads = std::max(1u, *o.threads);
  if (o.out) cfg.output = *o.out;
  if (o.kkt_tol) {
    if (!(*o.kkt_tol > 0.0)) throw ConfigError("--kkt-tol must be positive");
    cfg.solver.partial.kkt_tol = *o.kkt_tol;
  }
  if (o.gtol) {
    if (!(*o.gtol > 0.0)) throw ConfigError("--gtol must be positive");
    cfg.solver.lbfgs.gtol = *o.gtol;
  }
  return cfg;
}

std::string read_arg_or_file(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') return arg;
  std::ifstream in(arg);
  if (!in) throw ConfigError(arg + ": cannot open density file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian particle solver for spectral risk and partial multimarginal transport"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  long long seed = 0;
  unsigned threads = 1;
  std::string out;
  double kkt_tol = 0.0, gtol = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "random seed of the initial cloud");
  auto* threads_opt = app.add_option("--threads", threads, "threads for per-marginal penalty evaluation");
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* kkt_opt = app.add_option("--kkt-tol", kkt_tol, "KKT tolerance of the partial dual solver");
  auto* gtol_opt = app.add_option("--gtol", gtol, "relative gradient tolerance of L-BFGS");

  std::string config_path;
  auto* solve = app.add_subcommand("solve", "run one experiment and write its artifacts");
  solve->add_option("config", config_path, "configuration file")->required();
  auto* rates = app.add_subcommand("rates", "run a convergence study over N");
  rates->add_option("config", config_path, "configuration file")->required();
  auto* como = app.add_subcommand("comonotone", "write the comonotone cloud of a configuration");
  como->add_option("config", config_path, "configuration file")->required();

  std::string density_arg;
  std::size_t quant_n = 0;
  auto* quant = app.add_subcommand("quantize", "uniform quantization of a density given as JSON");
  quant->add_option("density", density_arg, "density JSON (inline or file)")->required();
  quant->add_option("--n", quant_n, "number of atoms")->required()->check(CLI::PositiveNumber);

  bool as_json = false;
  auto* list = app.add_subcommand("presets", "list the experiment presets");
  list->add_flag("--json", as_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  if (*seed_opt) o.seed = seed;
  if (*threads_opt) o.threads = threads;
  if (*out_opt) o.out = out;
  if (*kkt_opt) o.kkt_tol = kkt_tol;
  if (*gtol_opt) o.gtol = gtol;

  try {
    if (*list) {
      std::cout << list_presets(as_json);
    } else if (*quant) {
      const Density1D rho = density_from_json(nlohmann::json::parse(read_arg_or_file(density_arg)));
      const nlohmann::json q = quantizer_to_json(quantize_1d(rho, quant_n));
      if (o.out) {
        std::ofstream f(*o.out);
        f << q.dump(2) << '\n';
      } else {
        std::cout << q.dump(2) << '\n';
      }
    } else if (*solve) {
      const SolveReport r = run_solve(load_with(config_path, o));
      std::cout << "risk_value " << r.metrics["risk_value"].get<double>() << '\n';
    } else if (*rates) {
      const RateStudy s = run_rates(load_with(config_path, o));
      for (const auto& row : s.rows) {
        std::printf("N=%zu lambda=%.6g risk=%.12g abs_error=%.4g\n", row.n, row.lambda_final, row.risk_value,
                    row.abs_error);
      }
      std::printf("slope %.6f r2 %.6f\n", s.fit.slope, s.fit.r2);
    } else if (*como) {
      std::cout << run_comonotone(load_with(config_path, o)).dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 4;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
