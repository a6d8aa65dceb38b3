#include "lagrisk/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lagrisk/errors.hpp"

namespace lagrisk {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// JSON pointer -> source line, from a small scan of the raw text.

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

std::map<std::string, int> pointer_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string base;
    std::string key;
    std::size_t index;
  };
  std::map<std::string, int> out;
  std::vector<Frame> stack;
  int line = 1;
  bool expecting_key = false;
  bool pending_element = false;
  out[""] = 1;

  auto value_pointer = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.base + "/" + (f.object ? escape_token(f.key) : std::to_string(f.index));
  };
  auto begin_value = [&] {
    if (pending_element && !stack.empty() && !stack.back().object) {
      out[value_pointer()] = line;
    }
    pending_element = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') continue;
    if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
          ++i;
          s += text[i];
        } else {
          if (text[i] == '\n') ++line;
          s += text[i];
        }
      }
      if (!stack.empty() && stack.back().object && expecting_key) {
        stack.back().key = s;
        out[value_pointer()] = line;
        expecting_key = false;
      } else {
        begin_value();
      }
      continue;
    }
    switch (c) {
      case '{':
      case '[': {
        begin_value();
        const std::string base = value_pointer();
        stack.push_back({c == '{', base, "", 0});
        expecting_key = c == '{';
        pending_element = c == '[';
        break;
      }
      case '}':
      case ']':
        if (!stack.empty()) stack.pop_back();
        expecting_key = false;
        pending_element = false;
        break;
      case ',':
        if (!stack.empty()) {
          if (stack.back().object) {
            expecting_key = true;
          } else {
            ++stack.back().index;
            pending_element = true;
          }
        }
        break;
      case ':':
        break;
      default:
        begin_value();
        break;
    }
  }
  return out;
}

struct Context {
  std::string source;
  std::map<std::string, int> lines;

  [[noreturn]] void fail(std::string ptr, const std::string& msg) const {
    std::string where = ptr;
    for (;;) {
      auto it = lines.find(ptr);
      if (it != lines.end()) {
        throw ConfigError(source + ":" + std::to_string(it->second) + ": " + msg + " (at " +
                          (where.empty() ? "/" : where) + ")");
      }
      if (ptr.empty()) break;
      ptr = ptr.substr(0, ptr.rfind('/'));
    }
    throw ConfigError(source + ": " + msg + " (at " + (where.empty() ? "/" : where) + ", preset default)");
  }
};

/// Object reader that rejects keys it was never asked about.
class Reader {
 public:
  Reader(const Context& ctx, const json& j, std::string ptr) : ctx_(ctx), j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object()) ctx_.fail(ptr_, "expected an object");
  }

  [[nodiscard]] std::string ptr(const std::string& key) const { return ptr_ + "/" + escape_token(key); }
  [[nodiscard]] const std::string& self() const { return ptr_; }
  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const json& req(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) ctx_.fail(ptr_, "missing required key '" + key + "'");
    return j_.at(key);
  }
  const json* opt(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  double number(const std::string& key) { return as_number(req(key), ptr(key)); }
  double number(const std::string& key, double fallback) {
    const json* v = opt(key);
    return v ? as_number(*v, ptr(key)) : fallback;
  }
  long long integer(const std::string& key) { return as_integer(req(key), ptr(key)); }
  long long integer(const std::string& key, long long fallback) {
    const json* v = opt(key);
    return v ? as_integer(*v, ptr(key)) : fallback;
  }
  std::string string(const std::string& key) {
    const json& v = req(key);
    if (!v.is_string()) ctx_.fail(ptr(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = opt(key);
    if (!v) return fallback;
    if (!v->is_string()) ctx_.fail(ptr(key), "expected a string");
    return v->get<std::string>();
  }
  bool boolean(const std::string& key, bool fallback) {
    const json* v = opt(key);
    if (!v) return fallback;
    if (!v->is_boolean()) ctx_.fail(ptr(key), "expected true or false");
    return v->get<bool>();
  }
  std::vector<double> numbers(const std::string& key) {
    const json& v = req(key);
    if (!v.is_array()) ctx_.fail(ptr(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], ptr(key) + "/" + std::to_string(i)));
    return out;
  }
  std::vector<bool> booleans(const std::string& key) {
    const json& v = req(key);
    if (!v.is_array()) ctx_.fail(ptr(key), "expected an array of booleans");
    std::vector<bool> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_boolean()) ctx_.fail(ptr(key) + "/" + std::to_string(i), "expected true or false");
      out.push_back(v[i].get<bool>());
    }
    return out;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) ctx_.fail(ptr(item.key()), "unknown key '" + item.key() + "'");
    }
  }

  double as_number(const json& v, const std::string& where) const {
    if (!v.is_number()) ctx_.fail(where, "expected a number");
    return v.get<double>();
  }
  long long as_integer(const json& v, const std::string& where) const {
    if (!v.is_number_integer()) ctx_.fail(where, "expected an integer");
    return v.get<long long>();
  }

 private:
  const Context& ctx_;
  const json& j_;
  std::string ptr_;
  std::set<std::string> used_;
};

template <class F>
auto guarded(const Context& ctx, const std::string& ptr, F&& make) {
  try {
    return make();
  } catch (const DomainError& e) {
    ctx.fail(ptr, e.what());
  }
}

// Positional form {"family": ..., "params": [...]} in constructor order; null
// stands for an infinite upper bound.
Density1D parse_density_params(const Context& ctx, Reader& r, const std::string& family, const std::string& ptr) {
  const json& v = r.req("params");
  const std::string pptr = r.ptr("params");
  if (!v.is_array()) ctx.fail(pptr, "expected an array of numbers");
  std::vector<double> p;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].is_null() && family == "truncated_normal" && i == 3) {
      p.push_back(std::numeric_limits<double>::infinity());
    } else {
      p.push_back(r.as_number(v[i], pptr + "/" + std::to_string(i)));
    }
  }
  auto expect = [&](std::size_t k) {
    if (p.size() != k) ctx.fail(pptr, family + " expects " + std::to_string(k) + " parameters");
  };
  Density1D rho = Density1D::uniform(0.0, 1.0);
  if (family == "uniform") {
    expect(2);
    rho = guarded(ctx, ptr, [&] { return Density1D::uniform(p[0], p[1]); });
  } else if (family == "triangular") {
    expect(3);
    rho = guarded(ctx, ptr, [&] { return Density1D::triangular(p[0], p[1], p[2]); });
  } else if (family == "truncated_gumbel") {
    expect(4);
    rho = guarded(ctx, ptr, [&] { return Density1D::truncated_gumbel(p[0], p[1], p[2], p[3]); });
  } else if (family == "truncated_normal") {
    expect(4);
    rho = guarded(ctx, ptr, [&] { return Density1D::truncated_normal(p[0], p[1], p[2], p[3]); });
  } else if (family == "wigner_semicircle") {
    expect(2);
    rho = guarded(ctx, ptr, [&] { return Density1D::wigner_semicircle(p[0], p[1]); });
  } else if (family == "power_law") {
    expect(1);
    rho = guarded(ctx, ptr, [&] { return Density1D::power_law(p[0]); });
  } else if (family == "mixture") {
    ctx.fail(pptr, "mixtures take 'components', not 'params'");
  } else {
    ctx.fail(r.ptr("family"), "unknown density family '" + family + "'");
  }
  r.finish();
  return rho;
}

// "kind" and "variant" name the same field.
std::pair<std::string, std::string> read_kind(Reader& r) {
  const std::string key = r.has("variant") ? "variant" : "kind";
  return {r.string(key), r.ptr(key)};
}

Density1D parse_density(const Context& ctx, const json& j, const std::string& ptr) {
  Reader r(ctx, j, ptr);
  const std::string family = r.string("family");
  if (r.has("params")) return parse_density_params(ctx, r, family, ptr);
  Density1D rho = Density1D::uniform(0.0, 1.0);
  if (family == "uniform") {
    const double a = r.number("a"), b = r.number("b");
    rho = guarded(ctx, ptr, [&] { return Density1D::uniform(a, b); });
  } else if (family == "triangular") {
    const double a = r.number("a"), c = r.number("c"), b = r.number("b");
    rho = guarded(ctx, ptr, [&] { return Density1D::triangular(a, c, b); });
  } else if (family == "truncated_gumbel") {
    const double loc = r.number("location"), scale = r.number("scale"), lo = r.number("lo"), hi = r.number("hi");
    rho = guarded(ctx, ptr, [&] { return Density1D::truncated_gumbel(loc, scale, lo, hi); });
  } else if (family == "truncated_normal") {
    const double mean = r.number("mean"), sd = r.number("std"), lo = r.number("lo");
    double hi = std::numeric_limits<double>::infinity();
    if (const json* h = r.opt("hi"); h && !h->is_null()) hi = r.as_number(*h, r.ptr("hi"));
    rho = guarded(ctx, ptr, [&] { return Density1D::truncated_normal(mean, sd, lo, hi); });
  } else if (family == "wigner_semicircle") {
    const double c = r.number("center"), rad = r.number("radius");
    rho = guarded(ctx, ptr, [&] { return Density1D::wigner_semicircle(c, rad); });
  } else if (family == "power_law") {
    const double a = r.number("a");
    rho = guarded(ctx, ptr, [&] { return Density1D::power_law(a); });
  } else if (family == "mixture") {
    const json& comps = r.req("components");
    const std::string cptr = r.ptr("components");
    if (!comps.is_array() || comps.empty()) ctx.fail(cptr, "expected a non-empty array of components");
    std::vector<std::pair<double, Density1D>> parts;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string iptr = cptr + "/" + std::to_string(i);
      Reader cr(ctx, comps[i], iptr);
      const double w = cr.number("weight");
      Density1D d = parse_density(ctx, cr.req("density"), cr.ptr("density"));
      cr.finish();
      parts.emplace_back(w, d);
    }
    rho = guarded(ctx, ptr, [&] { return Density1D::mixture(parts); });
  } else {
    ctx.fail(r.ptr("family"), "unknown density family '" + family + "'");
  }
  r.finish();
  return rho;
}

CostFunction parse_cost(const Context& ctx, const json& j, const std::string& ptr) {
  Reader r(ctx, j, ptr);
  const auto [kind, kind_ptr] = read_kind(r);
  CostFunction c = CostFunction::linear_sum();
  if (kind == "squared_sum_surplus") {
    c = CostFunction::squared_sum_surplus();
  } else if (kind == "pairwise_quadratic") {
    auto w = r.numbers("weights");
    c = guarded(ctx, r.ptr("weights"), [&] { return CostFunction::pairwise_quadratic(w); });
  } else if (kind == "coulomb_reg" || kind == "coulomb_regularized") {
    c = CostFunction::coulomb_regularized();
  } else if (kind == "river_overflow") {
    c = CostFunction::river_overflow();
  } else if (kind == "product") {
    c = CostFunction::product();
  } else if (kind == "linear_sum") {
    c = CostFunction::linear_sum();
  } else if (kind == "sign_flips") {
    auto mask = r.booleans("mask");
    CostFunction inner = parse_cost(ctx, r.req("inner"), r.ptr("inner"));
    c = guarded(ctx, ptr, [&] { return CostFunction::sign_flips(mask, inner); });
  } else {
    ctx.fail(kind_ptr, "unknown cost kind '" + kind + "'");
  }
  r.finish();
  return c;
}

SpectralFunction parse_spectral(const Context& ctx, const json& j, const std::string& ptr) {
  Reader r(ctx, j, ptr);
  const auto [kind, kind_ptr] = read_kind(r);
  SpectralFunction a = SpectralFunction::constant();
  if (kind == "constant") {
  } else if (kind == "linear") {
    a = SpectralFunction::linear();
  } else if (kind == "cvar") {
    const double m = r.number("m");
    a = guarded(ctx, r.ptr("m"), [&] { return SpectralFunction::cvar(m); });
  } else if (kind == "quadratic_offset") {
    const double eta = r.number("eta", 0.1);
    a = guarded(ctx, r.ptr("eta"), [&] { return SpectralFunction::quadratic_offset(eta); });
  } else if (kind == "piecewise_constant") {
    auto b = r.numbers("breakpoints");
    auto v = r.numbers("values");
    a = guarded(ctx, ptr, [&] { return SpectralFunction::piecewise_constant(b, v); });
  } else {
    ctx.fail(kind_ptr, "unknown spectral kind '" + kind + "'");
  }
  r.finish();
  return a;
}

json spectral_to_json(const SpectralFunction& a) {
  switch (a.kind()) {
    case SpectralKind::constant: return {{"kind", "constant"}};
    case SpectralKind::linear: return {{"kind", "linear"}};
    case SpectralKind::cvar: return {{"kind", "cvar"}, {"m", a.mass()}};
    case SpectralKind::quadratic_offset: return {{"kind", "quadratic_offset"}, {"eta", a.eta()}};
    case SpectralKind::piecewise_constant:
      return {{"kind", "piecewise_constant"}, {"breakpoints", a.breakpoints()}, {"values", a.values()}};
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Presets

json uniform_json(double a, double b) { return {{"family", "uniform"}, {"a", a}, {"b", b}}; }
json tri_json(double a, double c, double b) { return {{"family", "triangular"}, {"a", a}, {"c", c}, {"b", b}}; }

json powers(int k_min, int k_max) { return {{"k_min", k_min}, {"k_max", k_max}}; }

}  // namespace

const std::vector<PresetInfo>& presets() {
  static const std::vector<PresetInfo> list{
      {"squared_sum", "mean of -|x1+x2+x3|^2 over U(0,2), Tri(0,1,2), semicircle(0,1); plane concentration", {}},
      {"partial_barycenter", "two-marginal partial barycenter with pairwise quadratic cost",
       {"translated_pyramid", "two_pyramids", "kitagawa_pass"}},
      {"coulomb_cvar", "partial problem with regularized Coulomb cost, uniform marginals, m = 0.5", {}},
      {"coulomb_quadratic", "risk of minus the regularized Coulomb cost, quadratic spectral function", {}},
      {"river", "flood model: linear spectral risk of the river overflow, six input variables", {}},
      {"rates", "convergence in N of the risk value for the product cost against the comonotone reference", {}},
  };
  return list;
}

std::string list_presets(bool as_json) {
  if (as_json) {
    json out = json::array();
    for (const auto& p : presets()) {
      out.push_back({{"name", p.name}, {"description", p.description}, {"variants", p.variants}});
    }
    return out.dump(2) + "\n";
  }
  std::ostringstream os;
  for (const auto& p : presets()) {
    os << p.name << "  " << p.description;
    if (!p.variants.empty()) {
      os << " [variants:";
      for (const auto& v : p.variants) os << ' ' << v;
      os << ']';
    }
    os << '\n';
  }
  return os.str();
}

json preset_defaults(const std::string& name, const std::string& variant) {
  json cfg;
  cfg["preset"] = name;
  cfg["seed"] = 0;
  cfg["output"] = "out/" + name + (variant.empty() ? "" : "_" + variant);
  if (name == "squared_sum") {
    cfg["problem"] = {{"marginals", {uniform_json(0, 2), tri_json(0, 1, 2),
                                     {{"family", "wigner_semicircle"}, {"center", 0.0}, {"radius", 1.0}}}},
                      {"cost", {{"kind", "squared_sum_surplus"}}},
                      {"spectral", {{"kind", "constant"}}},
                      {"mode", "full"},
                      {"n", 1000},
                      {"sense", 1}};
    cfg["schedule"] = powers(-2, 4);
  } else if (name == "partial_barycenter") {
    const std::string v = variant.empty() ? "translated_pyramid" : variant;
    cfg["variant"] = v;
    json marginals;
    double m = 0.4225;
    json schedule;
    if (v == "translated_pyramid") {
      marginals = {tri_json(0, 1, 2), tri_json(0.7, 1.7, 2.7)};
      schedule = powers(-3, 2);
    } else if (v == "two_pyramids") {
      marginals = {tri_json(0, 1, 2),
                   {{"family", "mixture"},
                    {"components",
                     {{{"weight", 2.0 / 3.0}, {"density", tri_json(-1, 0, 1)}},
                      {{"weight", 1.0 / 3.0}, {"density", tri_json(1, 2, 3)}}}}}};
      schedule = powers(-3, 6);
    } else if (v == "kitagawa_pass") {
      // reconstruction: uniform against a mixture sharing epsilon of its mass with it
      const double eps = 1.0 / 3.0;
      marginals = {uniform_json(0, 1),
                   {{"family", "mixture"},
                    {"components",
                     {{{"weight", 1.0 - eps}, {"density", uniform_json(1, 2)}},
                      {{"weight", eps}, {"density", uniform_json(0, 1)}}}}}};
      m = 0.5;
      schedule = powers(-1, 4);
    } else {
      throw ConfigError("unknown partial_barycenter variant '" + v + "'");
    }
    cfg["output"] = "out/partial_barycenter_" + v;
    cfg["problem"] = {{"marginals", marginals},
                      {"cost", {{"kind", "pairwise_quadratic"}, {"weights", {0.5, 0.5}}}},
                      {"spectral", {{"kind", "cvar"}, {"m", m}}},
                      {"mode", "partial"},
                      {"mass", m},
                      {"n", 1000},
                      {"sense", -1}};
    cfg["schedule"] = schedule;
  } else if (name == "coulomb_cvar") {
    cfg["problem"] = {{"marginals", {uniform_json(0, 1), uniform_json(0, 1), uniform_json(0, 1)}},
                      {"cost", {{"kind", "coulomb_reg"}}},
                      {"spectral", {{"kind", "cvar"}, {"m", 0.5}}},
                      {"mode", "partial"},
                      {"mass", 0.5},
                      {"n", 1500},
                      {"sense", -1}};
    cfg["schedule"] = powers(-3, 6);
  } else if (name == "coulomb_quadratic") {
    cfg["problem"] = {{"marginals", {uniform_json(0, 1), uniform_json(0, 1), uniform_json(0, 1)}},
                      {"cost", {{"kind", "coulomb_reg"}}},
                      {"spectral", {{"kind", "quadratic_offset"}, {"eta", 0.1}}},
                      {"mode", "full"},
                      {"n", 5000},
                      {"sense", -1}};
    cfg["schedule"] = powers(-3, 6);
  } else if (name == "river") {
    cfg["problem"] = {
        {"marginals",
         {{{"family", "truncated_gumbel"}, {"location", 1013.0}, {"scale", 558.0}, {"lo", 500.0}, {"hi", 3000.0}},
          {{"family", "truncated_normal"}, {"mean", 30.0}, {"std", 8.0}, {"lo", 15.0}, {"hi", nullptr}},
          tri_json(49, 50, 51), tri_json(54, 55, 56), tri_json(4990, 5000, 5010), tri_json(295, 300, 305)}},
        {"cost", {{"kind", "river_overflow"}}},
        {"spectral", {{"kind", "linear"}}},
        {"mode", "full"},
        {"n", 5000},
        {"sense", 1}};
    cfg["schedule"] = powers(-2, 2);
    cfg["reference"] = {{"flips", river_compatibility_flips()}};
  } else if (name == "rates") {
    cfg["problem"] = {{"marginals", {uniform_json(0, 1), uniform_json(0, 1)}},
                      {"cost", {{"kind", "product"}}},
                      {"spectral", {{"kind", "linear"}}},
                      {"mode", "full"},
                      {"n", 100},
                      {"sense", 1}};
    cfg["schedule"] = {{"rule", {{"p", 2.0}, {"beta", 1.0}, {"d", 1.0}, {"proxy", "h"}, {"k_min", -2}}}};
    cfg["reference"] = {{"flips", {false, false}}};
    cfg["rates"] = {{"ns", {25, 50, 100, 200, 400, 800}}, {"seeds", {0, 1, 2, 3, 4}}};
  } else if (name == "custom") {
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return cfg;
}

Density1D density_from_json(const json& j) {
  Context ctx{"<density>", {}};
  return parse_density(ctx, j, "");
}

json density_to_json(const Density1D& rho) {
  const auto p = rho.parameters();
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  switch (rho.family()) {
    case Family::uniform: return uniform_json(p[0], p[1]);
    case Family::triangular: return tri_json(p[0], p[1], p[2]);
    case Family::truncated_gumbel:
      return {{"family", "truncated_gumbel"}, {"location", p[0]}, {"scale", p[1]}, {"lo", p[2]}, {"hi", p[3]}};
    case Family::truncated_normal:
      return {{"family", "truncated_normal"}, {"mean", p[0]}, {"std", p[1]}, {"lo", p[2]}, {"hi", num(p[3])}};
    case Family::wigner_semicircle: return {{"family", "wigner_semicircle"}, {"center", p[0]}, {"radius", p[1]}};
    case Family::power_law: return {{"family", "power_law"}, {"a", p[0]}};
    case Family::mixture: {
      json comps = json::array();
      for (const auto& [w, d] : rho.components()) comps.push_back({{"weight", w}, {"density", density_to_json(d)}});
      return {{"family", "mixture"}, {"components", comps}};
    }
  }
  return nullptr;
}

json quantizer_to_json(const QuantizerResult& q) {
  json blocks = json::array();
  for (const auto& b : q.blocks) blocks.push_back({b.lo, b.hi});
  return {{"atoms", q.atoms}, {"error", q.error}, {"blocks", blocks}};
}

namespace {

// objects merged key by key with the preset; everything else is replaced
const std::set<std::string> merged_objects{"", "/problem", "/solver", "/rates"};

json merge_with(const json& base, const json& user, const std::string& ptr) {
  if (!base.is_object() || !user.is_object() || !merged_objects.count(ptr)) return user;
  json out = base;
  for (const auto& item : user.items()) {
    const std::string child = ptr + "/" + escape_token(item.key());
    out[item.key()] = out.contains(item.key()) ? merge_with(out[item.key()], item.value(), child) : item.value();
  }
  return out;
}

Schedule parse_schedule(const Context& ctx, const json& j, const std::string& ptr, ExperimentConfig& cfg) {
  Reader r(ctx, j, ptr);
  const int forms = (r.has("lambdas") ? 1 : 0) + ((r.has("k_min") || r.has("k_max")) ? 1 : 0) + (r.has("rule") ? 1 : 0);
  if (forms != 1) ctx.fail(ptr, "schedule needs exactly one of 'lambdas', 'k_min'/'k_max' or 'rule'");
  Schedule s;
  if (r.has("lambdas")) {
    s.lambdas = r.numbers("lambdas");
  } else if (r.has("rule")) {
    Reader rr(ctx, r.req("rule"), r.ptr("rule"));
    RateModel rule;
    rule.p = rr.number("p", 2.0);
    rule.beta = rr.number("beta", 1.0);
    rule.d = rr.number("d", 1.0);
    const std::string proxy = rr.string("proxy", "h");
    if (proxy == "h") {
      rule.proxy = RateModel::Proxy::h;
    } else if (proxy == "tau") {
      rule.proxy = RateModel::Proxy::tau;
    } else {
      ctx.fail(rr.ptr("proxy"), "proxy must be 'h' or 'tau'");
    }
    if (rule.p != 2.0) ctx.fail(rr.ptr("p"), "only p = 2 is supported");
    cfg.rule_k_min = static_cast<int>(rr.integer("k_min", -2));
    rr.finish();
    guarded(ctx, r.ptr("rule"), [&] {
      rule.validate();
      return 0;
    });
    cfg.rule = rule;
  } else {
    const long long k_min = r.integer("k_min"), k_max = r.integer("k_max");
    if (k_max < k_min || k_max - k_min > 40) ctx.fail(ptr, "need k_min <= k_max with at most 41 stages");
    s = Schedule::powers_of_ten(static_cast<int>(k_min), static_cast<int>(k_max));
  }
  r.finish();
  if (!cfg.rule) {
    guarded(ctx, ptr, [&] {
      s.validate();
      return 0;
    });
  }
  return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  Context ctx{source, pointer_lines(text)};
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(source + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  if (!user.is_object()) ctx.fail("", "configuration must be a JSON object");

  ExperimentConfig cfg;
  std::string preset = "custom";
  if (user.contains("preset")) {
    if (!user["preset"].is_string()) ctx.fail("/preset", "expected a string");
    preset = user["preset"].get<std::string>();
  }
  std::string variant;
  if (user.contains("variant")) {
    if (!user["variant"].is_string()) ctx.fail("/variant", "expected a string");
    variant = user["variant"].get<std::string>();
  }
  json base;
  try {
    base = preset_defaults(preset, variant);
  } catch (const ConfigError& e) {
    ctx.fail(user.contains("variant") && preset == "partial_barycenter" ? "/variant" : "/preset", e.what());
  }
  if (!variant.empty() && preset != "partial_barycenter") ctx.fail("/variant", "preset '" + preset + "' has no variants");
  const json merged = merge_with(base, user, "");
  cfg.resolved = merged;

  Reader top(ctx, merged, "");
  cfg.preset = top.string("preset", "custom");
  cfg.variant = top.string("variant", "");
  {
    const long long seed = top.integer("seed", 0);
    if (seed < 0) ctx.fail("/seed", "seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  cfg.output = top.string("output", "out");
  top.opt("description");

  // problem
  {
    Reader p(ctx, top.req("problem"), "/problem");
    const json& ms = p.req("marginals");
    if (!ms.is_array()) ctx.fail(p.ptr("marginals"), "expected an array of densities");
    for (std::size_t i = 0; i < ms.size(); ++i) {
      cfg.problem.marginals.push_back(parse_density(ctx, ms[i], p.ptr("marginals") + "/" + std::to_string(i)));
    }
    cfg.problem.cost = parse_cost(ctx, p.req("cost"), p.ptr("cost"));
    cfg.problem.spectral = parse_spectral(ctx, p.req("spectral"), p.ptr("spectral"));
    const std::string mode = p.string("mode", "full");
    if (mode == "full") {
      cfg.problem.mode = Mode::full;
      if (p.has("mass")) ctx.fail(p.ptr("mass"), "'mass' only applies to partial mode");
    } else if (mode == "partial") {
      cfg.problem.mode = Mode::partial;
      const bool is_cvar = cfg.problem.spectral.kind() == SpectralKind::cvar;
      if (p.has("mass")) {
        cfg.problem.mass = p.number("mass");
        if (is_cvar && std::abs(cfg.problem.mass - cfg.problem.spectral.mass()) > 1e-15) {
          ctx.fail(p.ptr("mass"), "mass must equal the cvar parameter m");
        }
      } else if (is_cvar) {
        cfg.problem.mass = cfg.problem.spectral.mass();
      } else {
        ctx.fail(p.self(), "partial mode needs 'mass'");
      }
    } else {
      ctx.fail(p.ptr("mode"), "mode must be 'full' or 'partial'");
    }
    p.opt("mass");
    const long long n = p.integer("n");
    if (n < 1) ctx.fail(p.ptr("n"), "n must be positive");
    cfg.problem.n = static_cast<std::size_t>(n);
    const long long sense = p.integer("sense", 1);
    if (sense != 1 && sense != -1) ctx.fail(p.ptr("sense"), "sense must be 1 or -1");
    cfg.problem.sense = static_cast<int>(sense);
    p.finish();
    guarded(ctx, "/problem", [&] {
      cfg.problem.validate();
      return 0;
    });
  }

  cfg.schedule = parse_schedule(ctx, top.req("schedule"), "/schedule", cfg);

  if (const json* s = top.opt("solver")) {
    Reader r(ctx, *s, "/solver");
    auto& o = cfg.solver;
    o.lbfgs.gtol = r.number("gtol", o.lbfgs.gtol);
    o.lbfgs.ftol = r.number("ftol", o.lbfgs.ftol);
    o.lbfgs.c1 = r.number("c1", o.lbfgs.c1);
    o.lbfgs.c2 = r.number("c2", o.lbfgs.c2);
    o.lbfgs.max_iters = static_cast<int>(r.integer("max_iters", o.lbfgs.max_iters));
    o.lbfgs.max_linesearch = static_cast<int>(r.integer("max_linesearch", o.lbfgs.max_linesearch));
    const long long memory = r.integer("memory", static_cast<long long>(o.lbfgs.memory));
    o.partial.kkt_tol = r.number("kkt_tol", o.partial.kkt_tol);
    o.partial.max_dual_iters = static_cast<int>(r.integer("max_dual_iters", o.partial.max_dual_iters));
    o.box_constraints = r.boolean("box_constraints", o.box_constraints);
    const long long threads = r.integer("threads", 1);
    r.finish();
    if (!(o.lbfgs.gtol > 0.0)) ctx.fail("/solver/gtol", "gtol must be positive");
    if (!(o.lbfgs.ftol >= 0.0)) ctx.fail("/solver/ftol", "ftol must be nonnegative");
    if (!(0.0 < o.lbfgs.c1 && o.lbfgs.c1 < o.lbfgs.c2 && o.lbfgs.c2 < 1.0)) {
      ctx.fail("/solver", "need 0 < c1 < c2 < 1");
    }
    if (o.lbfgs.max_iters < 1) ctx.fail("/solver/max_iters", "max_iters must be positive");
    if (memory < 1) ctx.fail("/solver/memory", "memory must be positive");
    o.lbfgs.memory = static_cast<std::size_t>(memory);
    if (!(o.partial.kkt_tol > 0.0)) ctx.fail("/solver/kkt_tol", "kkt_tol must be positive");
    if (threads < 1) ctx.fail("/solver/threads", "threads must be positive");
    o.threads = static_cast<unsigned>(threads);
  }

  if (const json* ref = top.opt("reference")) {
    Reader r(ctx, *ref, "/reference");
    auto flips = r.has("flips") ? r.booleans("flips") : std::vector<bool>(cfg.problem.dimension(), false);
    r.finish();
    if (flips.size() != cfg.problem.dimension()) ctx.fail("/reference/flips", "flip mask length must equal D");
    cfg.reference_flips = flips;
  }

  if (const json* rates = top.opt("rates")) {
    Reader r(ctx, *rates, "/rates");
    for (double v : r.numbers("ns")) {
      if (!(v >= 1.0) || v != std::floor(v)) ctx.fail("/rates/ns", "ns must be positive integers");
      cfg.rate_ns.push_back(static_cast<std::size_t>(v));
    }
    if (r.has("seeds")) {
      for (double v : r.numbers("seeds")) {
        if (!(v >= 0.0) || v != std::floor(v)) ctx.fail("/rates/seeds", "seeds must be nonnegative integers");
        cfg.rate_seeds.push_back(static_cast<std::uint64_t>(v));
      }
    } else {
      cfg.rate_seeds = {cfg.seed};
    }
    r.finish();
  }
  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

Schedule schedule_for(const ExperimentConfig& cfg, std::size_t n) {
  if (cfg.rule) return Schedule::from_rate(*cfg.rule, n, cfg.problem.marginals, cfg.rule_k_min);
  return cfg.schedule;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json stage_json(const StageRecord& s) {
  json pen = json::array();
  for (double p : s.penalties) pen.push_back(num_or_null(p));
  return {{"lambda", s.lambda},
          {"value", num_or_null(s.value)},
          {"grad_norm", num_or_null(s.grad_norm)},
          {"iterations", s.iterations},
          {"evaluations", s.evaluations},
          {"status", std::string(to_string(s.status))},
          {"risk_term", num_or_null(s.risk_term)},
          {"w2sq", pen}};
}

double overlap_mass(const Density1D& a, const Density1D& b) {
  std::vector<double> cuts{std::min(a.support().lo, b.support().lo), std::max(a.support().hi, b.support().hi)};
  for (double k : a.kinks()) cuts.push_back(k);
  for (double k : b.kinks()) cuts.push_back(k);
  cuts.push_back(a.support().lo);
  cuts.push_back(a.support().hi);
  cuts.push_back(b.support().lo);
  cuts.push_back(b.support().hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double x) { return std::min(a.pdf(x), b.pdf(x)); }, cuts[k], cuts[k + 1], 30, 1e-12);
  }
  return total;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
}

json cells_json(const std::vector<PenaltyResult>& terms) {
  json out = json::array();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const auto& dec = terms[j].cells;
    json cells = json::array();
    for (const auto& c : dec.cells) {
      cells.push_back({{"index", c.index},
                       {"l", c.l},
                       {"r", c.r},
                       {"psi", c.psi},
                       {"barycenter", c.barycenter},
                       {"mass", c.mass}});
    }
    out.push_back({{"marginal", j},
                   {"partial", dec.partial},
                   {"mass_per_atom", dec.mass_per_atom},
                   {"kkt_residual", dec.kkt_residual},
                   {"value", terms[j].value},
                   {"cells", cells}});
  }
  return out;
}

}  // namespace

void write_points_csv(const std::string& path, const ParticleCloud& cloud, const std::vector<double>& costs,
                      const std::vector<double>& weights) {
  std::string s = "index";
  for (std::size_t j = 0; j < cloud.dim; ++j) s += ",x" + std::to_string(j + 1);
  s += ",cost,rank_weight\r\n";
  const double n = static_cast<double>(cloud.n);
  for (std::size_t i = 0; i < cloud.n; ++i) {
    s += std::to_string(i);
    for (std::size_t j = 0; j < cloud.dim; ++j) s += "," + fmt(cloud.at(i, j));
    s += "," + fmt(costs[i]) + "," + fmt(n * weights[i]) + "\r\n";
  }
  write_text(path, s);
}

SolveReport run_solve(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ProblemSpec& spec = cfg.problem;
  const fs::path out = cfg.output;
  fs::create_directories(out);

  std::ofstream trace(out / "trace.jsonl", std::ios::binary);
  if (!trace) throw std::runtime_error("cannot write " + (out / "trace.jsonl").string());

  const DiscreteObjective objective(spec, cfg.solver);
  SolverOptions opts = cfg.solver;
  opts.on_trace = [&](const TraceRecord& r) {
    json pen = json::array();
    for (double p : r.penalties) pen.push_back(num_or_null(p));
    json line = {{"lambda", r.lambda},
                 {"iteration", r.iteration},
                 {"value", num_or_null(r.value)},
                 {"grad_norm", num_or_null(r.grad_norm)},
                 {"w2sq", pen}};
    trace << line.dump() << '\n';
  };
  std::vector<json> stages;
  opts.on_stage = [&](const StageRecord& s, const ParticleCloud& cloud) {
    stages.push_back(stage_json(s));
    trace.flush();
    try {
      const ObjectiveEvaluation ev = objective.evaluate(s.lambda, cloud.positions);
      write_points_csv((out / "points.csv").string(), cloud, ev.costs, ev.weights);
    } catch (const CostDomainError&) {
    }
  };

  json metrics;
  metrics["preset"] = cfg.preset;
  if (!cfg.variant.empty()) metrics["variant"] = cfg.variant;
  metrics["n"] = spec.n;
  metrics["dim"] = spec.dimension();
  metrics["mode"] = spec.mode == Mode::full ? "full" : "partial";
  if (spec.mode == Mode::partial) metrics["mass"] = spec.mass;
  metrics["sense"] = spec.sense;
  metrics["seed"] = cfg.seed;
  metrics["cost"] = std::string(spec.cost.name());
  metrics["spectral"] = spectral_to_json(spec.spectral);

  const Schedule schedule = schedule_for(cfg, spec.n);
  metrics["schedule"] = schedule.lambdas;

  SolveReport report;
  try {
    report.result = minimize(spec, schedule, init_cloud(spec, cfg.seed), opts);
  } catch (const std::exception& e) {
    metrics["status"] = "failed";
    metrics["error"] = e.what();
    metrics["stages"] = stages;
    metrics["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(out / "metrics.json", metrics.dump(2) + "\n");
    throw;
  }
  const ParticleCloud& cloud = report.result.cloud;
  const double lambda = schedule.lambdas.back();

  const ObjectiveEvaluation ev = objective.evaluate(lambda, cloud.positions);
  write_points_csv((out / "points.csv").string(), cloud, ev.costs, ev.weights);
  const std::vector<PenaltyResult> terms = objective.penalty_terms(cloud.positions);
  write_text(out / "cells.json", cells_json(terms).dump(1) + "\n");

  metrics["status"] = "ok";
  metrics["lambda_final"] = lambda;
  metrics["objective"] = ev.value;
  metrics["risk_value"] = ev.risk_term;
  json w2 = json::array();
  double w2_max = 0.0;
  for (double p : ev.penalties) {
    w2.push_back(std::sqrt(std::max(0.0, p)));
    w2_max = std::max(w2_max, std::sqrt(std::max(0.0, p)));
  }
  metrics[spec.mode == Mode::full ? "marginal_w2" : "marginal_w2_max"] = w2;
  json widths = json::array();
  for (const auto& rho : spec.marginals) widths.push_back(rho.support().width());
  metrics["support_widths"] = widths;

  const double mean_cost =
      std::accumulate(ev.costs.begin(), ev.costs.end(), 0.0) / static_cast<double>(spec.n);
  metrics["mean_cost"] = mean_cost;

  if (cfg.reference_flips) {
    if (spec.sense != 1) throw ConfigError("the comonotone reference needs sense = 1");
    const double ref = reference_value(spec.cost, spec.spectral, spec.marginals, *cfg.reference_flips);
    metrics["reference"] = ref;
    metrics["abs_error"] = std::abs(ev.risk_term - ref);
    metrics["relative_error"] = std::abs(ev.risk_term - ref) / std::max(std::abs(ref), 1e-300);
  }
  if (cfg.preset == "squared_sum") {
    double target = 0.0;
    for (const auto& rho : spec.marginals) target += rho.mean();
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < spec.dimension(); ++j) s += cloud.at(i, j);
      acc += (s - target) * (s - target);
    }
    metrics["plane_target"] = target;
    metrics["mean_sq_dev_plane"] = acc / static_cast<double>(spec.n);
  }
  if (cfg.preset == "partial_barycenter" && spec.dimension() == 2) {
    metrics["overlap_mass"] = overlap_mass(spec.marginals[0], spec.marginals[1]);
    metrics["transport_cost"] = spec.mass * mean_cost;
  }
  if (cfg.preset == "river") {
    metrics["rank_correlation_q_cost"] = pearson(ranks(cloud.column(0)), ranks(ev.costs));
    if (cfg.reference_flips) {
      const ParticleCloud co = comonotone_points(spec.marginals, 10000, *cfg.reference_flips);
      std::vector<double> costs(co.n);
      for (std::size_t i = 0; i < co.n; ++i) costs[i] = spec.cost(co.point(i));
      metrics["reference_discrete_1e4"] = risk_value_and_weights(spec.spectral, costs).value;
    }
  }
  metrics["stages"] = stages;
  metrics["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(out / "metrics.json", metrics.dump(2) + "\n");
  report.metrics = metrics;
  return report;
}

RateStudy run_rates(const ExperimentConfig& cfg, bool write_files) {
  if (cfg.rate_ns.size() < 4) throw ConfigError("rate study needs 'rates.ns' with at least 4 values");
  if (!cfg.reference_flips) throw ConfigError("rate study needs a 'reference' section");
  if (cfg.problem.sense != 1) throw ConfigError("rate study reference needs sense = 1");
  const double ref = reference_value(cfg.problem.cost, cfg.problem.spectral, cfg.problem.marginals,
                                     *cfg.reference_flips);
  RateStudy study;
  std::string runs = "N,seed,lambda_final,risk_value,abs_error,marginal_w2_max\r\n";
  for (std::size_t n : cfg.rate_ns) {
    ProblemSpec spec = cfg.problem;
    spec.n = n;
    const Schedule schedule = schedule_for(cfg, n);
    const DiscreteObjective objective(spec, cfg.solver);
    RateRow row;
    row.n = n;
    row.lambda_final = schedule.lambdas.back();
    row.reference = ref;
    for (std::uint64_t seed : cfg.rate_seeds) {
      const SolveResult res = minimize(spec, schedule, init_cloud(spec, seed), cfg.solver);
      const ObjectiveEvaluation ev = objective.evaluate(row.lambda_final, res.cloud.positions);
      double w2 = 0.0;
      for (double p : ev.penalties) w2 = std::max(w2, std::sqrt(std::max(0.0, p)));
      row.risk_value += ev.risk_term / static_cast<double>(cfg.rate_seeds.size());
      row.marginal_w2_max = std::max(row.marginal_w2_max, w2);
      runs += std::to_string(n) + "," + std::to_string(seed) + "," + fmt(row.lambda_final) + "," +
              fmt(ev.risk_term) + "," + fmt(std::abs(ev.risk_term - ref)) + "," + fmt(w2) + "\r\n";
    }
    row.abs_error = std::abs(row.risk_value - ref);
    study.rows.push_back(row);
  }
  std::vector<double> ns, errs;
  for (const auto& r : study.rows) {
    ns.push_back(static_cast<double>(r.n));
    errs.push_back(r.abs_error);
  }
  study.fit = fit_rate(ns, errs);

  if (write_files) {
    const fs::path out = cfg.output;
    fs::create_directories(out);
    std::string csv = "N,lambda_final,risk_value,reference,abs_error,marginal_w2_max\r\n";
    for (const auto& r : study.rows) {
      csv += std::to_string(r.n) + "," + fmt(r.lambda_final) + "," + fmt(r.risk_value) + "," + fmt(r.reference) +
             "," + fmt(r.abs_error) + "," + fmt(r.marginal_w2_max) + "\r\n";
    }
    write_text(out / "rates.csv", csv);
    write_text(out / "rates_runs.csv", runs);
    json fit = {{"slope", study.fit.slope}, {"intercept", study.fit.intercept}, {"r2", study.fit.r2},
                {"ns", study.fit.ns},       {"errors", study.fit.errors},       {"reference", ref}};
    write_text(out / "rate_fit.json", fit.dump(2) + "\n");
  }
  return study;
}

json run_comonotone(const ExperimentConfig& cfg) {
  const ProblemSpec& spec = cfg.problem;
  const std::vector<bool> flips = cfg.reference_flips.value_or(std::vector<bool>(spec.dimension(), false));
  const ParticleCloud cloud = comonotone_points(spec.marginals, spec.n, flips);
  std::vector<double> costs(cloud.n), signed_costs(cloud.n);
  for (std::size_t i = 0; i < cloud.n; ++i) {
    costs[i] = spec.cost(cloud.point(i));
    signed_costs[i] = spec.sense * costs[i];
  }
  const SpectralFunction alpha = spec.mode == Mode::full ? spec.spectral : SpectralFunction::constant();
  const RiskEvaluation risk = risk_value_and_weights(alpha, signed_costs);
  const fs::path out = cfg.output;
  fs::create_directories(out);
  write_points_csv((out / "points.csv").string(), cloud, costs, risk.weights);
  json metrics = {{"n", spec.n}, {"flips", flips}, {"risk_value", risk.value}};
  if (spec.sense == 1 && spec.mode == Mode::full) {
    metrics["reference"] = reference_value(spec.cost, spec.spectral, spec.marginals, flips);
  }
  write_text(out / "metrics.json", metrics.dump(2) + "\n");
  return metrics;
}

}  // namespace lagrisk
