#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "lagrisk/experiment.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lagrisk_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + LAGRISK_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

struct Row {
  double cost = 0.0;
  double rank_weight = 0.0;
};

std::vector<Row> read_points(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    REQUIRE(fields.size() >= 3);
    rows.push_back({std::stod(fields[fields.size() - 2]), std::stod(fields.back())});
  }
  return rows;
}

const char* small_solve = R"({
  "preset": "squared_sum",
  "problem": {"n": 40},
  "schedule": {"lambdas": [0.1, 1, 10]},
  "seed": 5
})";

}  // namespace

TEST_CASE("solve writes every artifact and is deterministic") {
  const auto dir = scratch("determinism");
  const auto cfg = write_config(dir, small_solve);
  REQUIRE(run("solve \"" + cfg.string() + "\" --out \"" + (dir / "a").string() + "\"", dir / "a.log") == 0);
  REQUIRE(run("solve \"" + cfg.string() + "\" --out \"" + (dir / "b").string() + "\"", dir / "b.log") == 0);
  for (const char* name : {"points.csv", "trace.jsonl", "metrics.json", "cells.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(dir / "a" / name));
  }
  CHECK(slurp(dir / "a" / "points.csv") == slurp(dir / "b" / "points.csv"));

  // every trace line is a JSON object
  std::istringstream trace(slurp(dir / "a" / "trace.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) {
    CHECK(nlohmann::json::parse(line).is_object());
    ++lines;
  }
  CHECK(lines > 0);
}

TEST_CASE("risk recomputed from points.csv matches metrics.json") {
  const auto dir = scratch("recompute");
  const auto cfg = write_config(dir, small_solve);
  REQUIRE(run("solve \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"", dir / "log") == 0);
  const auto metrics = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
  const auto rows = read_points(dir / "out" / "points.csv");
  REQUIRE(rows.size() == 40);
  double risk = 0.0, weight_sum = 0.0;
  for (const auto& r : rows) {
    risk += r.cost * r.rank_weight / static_cast<double>(rows.size());
    weight_sum += r.rank_weight;
  }
  CHECK(weight_sum == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(std::abs(risk - metrics.at("risk_value").get<double>()) <= 1e-10);
  CHECK(metrics.at("status") == "ok");
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit_codes");
  CHECK(run("frobnicate", dir / "a.log") == 2);
  CHECK(run("solve", dir / "b.log") == 2);
  const auto bad = write_config(dir, "{\n  \"preset\": \"squared_sum\",\n  \"nonsense\": true\n}");
  CHECK(run("solve \"" + bad.string() + "\"", dir / "c.log") == 3);
  CHECK(slurp(dir / "c.log").find("nonsense") != std::string::npos);
  CHECK(run("solve \"" + (dir / "missing.json").string() + "\"", dir / "d.log") == 3);
}

TEST_CASE("presets listing") {
  const auto dir = scratch("presets");
  REQUIRE(run("presets --json", dir / "list.json") == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "list.json"));
  REQUIRE(j.is_array());
  std::vector<std::string> names;
  for (const auto& p : j) names.push_back(p.at("name"));
  for (const char* name : {"squared_sum", "partial_barycenter", "river", "rates"}) {
    CHECK(std::find(names.begin(), names.end(), name) != names.end());
  }
  REQUIRE(run("presets", dir / "list.txt") == 0);
  CHECK(slurp(dir / "list.txt").find("river") != std::string::npos);
}

TEST_CASE("quantize prints the uniform quantizer") {
  const auto dir = scratch("quantize");
  REQUIRE(run("quantize '{\"family\": \"uniform\", \"a\": 0, \"b\": 1}' --n 4", dir / "q.json") == 0);
  const auto q = nlohmann::json::parse(slurp(dir / "q.json"));
  const std::vector<double> atoms = q.at("atoms");
  REQUIRE(atoms.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(atoms[i] == doctest::Approx((static_cast<double>(i) + 0.5) / 4.0));
  // e = 1 / (2 sqrt(3) N)
  CHECK(q.at("error").get<double>() == doctest::Approx(1.0 / (2.0 * std::sqrt(3.0) * 4.0)).epsilon(1e-12));
}

TEST_CASE("shipped configuration files load") {
  const fs::path configs = fs::path(LAGRISK_SOURCE_DIR) / "configs";
  REQUIRE(fs::is_directory(configs));
  int count = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW((void)lagrisk::load_config(entry.path().string()));
    ++count;
  }
  CHECK(count >= 6);
}
