#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <algorithm>
#include <vector>

#include "diracgap/error.hpp"
#include "diracgap/model.hpp"

namespace diracgap::config {

struct LambdaGrid {
  double min = -0.9;
  double max = 0.999;
  int points = 50;
};

struct GammaForm {
  double scale = 1.0;
  double numerator_power = 2.0;
  double denominator_power = 5.0;
};

struct FForm {
  std::string form = "linear";  // linear | saturating
  double coefficient = 1.0;
};

struct CouplingConfig {
  GammaForm gamma;
  FForm F;
  double constant = 4.0 * pi;
};

struct EigenfunctionTask {
  int index = 0;
  int samples = 400;
};

struct AccumulationTask {
  std::string endpoint = "plus";
  std::vector<double> schedule{1e2, 1e3, 1e4, 1e5};
};

struct BranchTask {
  int seed_index = 0;
  double ds = 1e-4;
  int max_steps = 25;
  double a_max = std::numeric_limits<double>::infinity();
  std::vector<int> save_solutions;
  int samples = 200;
};

struct RunConfig {
  std::string source_path;
  std::string source_text;

  // problem
  std::string potential_kind = "pure-coulomb";
  double gamma = 0.0;
  double alpha = 1.0;
  double screening_amplitude = 0.0;
  double screening_length = 1.0;
  std::string table_file;
  int k = -1;
  double mu_a = 0.0;

  // numerics
  double rtol = 1e-10;
  double atol = 1e-12;
  double tolerance = 1e-9;
  std::optional<double> delta;
  double epsilon = 1e-3;
  std::optional<double> window_x0;
  std::optional<double> window_x_inf;
  LambdaGrid grid;
  unsigned threads = 0;
  int hypothesis_points_per_decade = 32;

  std::optional<CouplingConfig> coupling;
  EigenfunctionTask eigenfunction;
  AccumulationTask accumulation;
  BranchTask branch;

  std::string output_directory = ".";
};

/// 64-bit FNV-1a digest of the configuration text.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(c.source_text)));
  return buf;
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  std::vector<std::string> errors;

  std::string where(const YAML::Node& n) const {
    const auto m = n.Mark();
    return file_ + ":" + (m.line >= 0 ? std::to_string(m.line + 1) : std::string("?"));
  }
  void error(const YAML::Node& n, const std::string& msg) { errors.push_back(where(n) + ": " + msg); }

  bool is_map(const YAML::Node& n, const std::string& name) {
    if (!n.IsMap()) {
      error(n, "'" + name + "' must be a mapping");
      return false;
    }
    return true;
  }

  void allow(const YAML::Node& n, const std::string& block, std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      if (!ok.count(key)) error(kv.first, "unknown key '" + key + "' in " + block);
    }
  }

  template <class T>
  void get(const YAML::Node& parent, const char* key, T& out) {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      error(n, std::string("invalid value for '") + key + "'");
    }
  }
  template <class T>
  void get(const YAML::Node& parent, const char* key, std::optional<T>& out) {
    const YAML::Node n = parent[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      error(n, std::string("invalid value for '") + key + "'");
    }
  }
  void check(bool cond, const YAML::Node& n, const std::string& msg) {
    if (!cond) error(n, msg);
  }

 private:
  std::string file_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& name = "<config>") {
  RunConfig c;
  c.source_path = name;
  c.source_text = text;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::config, name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  detail::Reader r(name);
  if (!root.IsMap()) throw Error(ErrorKind::config, name + ": top level must be a mapping");
  r.allow(root, "top level", {"problem", "numerics", "coupling", "task", "output"});

  const YAML::Node problem = root["problem"];
  if (!problem) {
    r.errors.push_back(name + ": missing required block 'problem'");
  } else if (r.is_map(problem, "problem")) {
    r.allow(problem, "problem", {"potential", "k", "mu_a", "gap"});
    if (!problem["k"]) r.error(problem, "missing required key 'k' in problem");
    r.get(problem, "k", c.k);
    r.check(c.k != 0, problem["k"] ? problem["k"] : problem, "k must be a nonzero integer");
    r.get(problem, "mu_a", c.mu_a);
    if (const YAML::Node g = problem["gap"]) {
      std::vector<double> gap;
      r.get(problem, "gap", gap);
      r.check(gap.size() == 2 && gap[0] == -1.0 && gap[1] == 1.0, g, "the Dirac family has gap [-1, 1]");
    }
    const YAML::Node pot = problem["potential"];
    if (!pot) {
      r.error(problem, "missing required block 'potential' in problem");
    } else if (r.is_map(pot, "potential")) {
      r.allow(pot, "potential", {"kind", "gamma", "alpha", "screening", "file"});
      r.get(pot, "kind", c.potential_kind);
      r.get(pot, "gamma", c.gamma);
      r.get(pot, "alpha", c.alpha);
      r.check(c.alpha > 0, pot, "alpha must be positive");
      if (c.potential_kind == "coulomb-with-remainder") {
        const YAML::Node sc = pot["screening"];
        if (!sc) {
          r.error(pot, "coulomb-with-remainder needs a 'screening' block");
        } else if (r.is_map(sc, "screening")) {
          r.allow(sc, "screening", {"amplitude", "length"});
          r.get(sc, "amplitude", c.screening_amplitude);
          r.get(sc, "length", c.screening_length);
          r.check(c.screening_length > 0, sc, "screening length must be positive");
        }
      } else if (c.potential_kind == "tabulated") {
        r.check(static_cast<bool>(pot["file"]), pot, "tabulated potential needs 'file'");
        r.get(pot, "file", c.table_file);
      } else if (c.potential_kind != "pure-coulomb") {
        r.error(pot["kind"], "unknown potential kind '" + c.potential_kind +
                                 "' (expected pure-coulomb, coulomb-with-remainder or tabulated)");
      }
    }
  }

  if (const YAML::Node num = root["numerics"]; num && r.is_map(num, "numerics")) {
    r.allow(num, "numerics",
            {"rtol", "atol", "tolerance", "delta", "epsilon", "window", "lambda_grid", "threads",
             "hypothesis_points_per_decade"});
    r.get(num, "rtol", c.rtol);
    r.get(num, "atol", c.atol);
    r.get(num, "tolerance", c.tolerance);
    r.get(num, "delta", c.delta);
    r.get(num, "epsilon", c.epsilon);
    r.get(num, "threads", c.threads);
    r.get(num, "hypothesis_points_per_decade", c.hypothesis_points_per_decade);
    r.check(c.rtol > 0 && c.atol > 0 && c.tolerance > 0 && c.epsilon > 0, num, "tolerances must be positive");
    r.check(!c.delta || *c.delta > 0, num, "delta must be positive");
    if (const YAML::Node wn = num["window"]; wn && r.is_map(wn, "window")) {
      r.allow(wn, "window", {"x0", "x_inf"});
      r.get(wn, "x0", c.window_x0);
      r.get(wn, "x_inf", c.window_x_inf);
      r.check(!c.window_x0 || *c.window_x0 > 0, wn, "window x0 must be positive");
      r.check(!c.window_x0 || !c.window_x_inf || *c.window_x0 < *c.window_x_inf, wn, "window needs x0 < x_inf");
    }
    if (const YAML::Node gn = num["lambda_grid"]; gn && r.is_map(gn, "lambda_grid")) {
      r.allow(gn, "lambda_grid", {"min", "max", "points"});
      r.get(gn, "min", c.grid.min);
      r.get(gn, "max", c.grid.max);
      r.get(gn, "points", c.grid.points);
      r.check(c.grid.points >= 0, gn, "points must be nonnegative");
      r.check(c.grid.min > -1.0 && c.grid.max < 1.0 && c.grid.min <= c.grid.max, gn,
              "lambda grid must lie inside the open gap (-1, 1)");
    }
  }

  if (const YAML::Node cp = root["coupling"]; cp && r.is_map(cp, "coupling")) {
    r.allow(cp, "coupling", {"type", "gamma", "F", "constant"});
    CouplingConfig cc;
    std::string type = "soler";
    r.get(cp, "type", type);
    r.check(type == "soler", cp, "only coupling type 'soler' is supported");
    if (const YAML::Node g = cp["gamma"]; g && r.is_map(g, "gamma")) {
      r.allow(g, "coupling.gamma", {"scale", "numerator_power", "denominator_power"});
      r.get(g, "scale", cc.gamma.scale);
      r.get(g, "numerator_power", cc.gamma.numerator_power);
      r.get(g, "denominator_power", cc.gamma.denominator_power);
    }
    if (const YAML::Node fn = cp["F"]; fn && r.is_map(fn, "F")) {
      r.allow(fn, "coupling.F", {"form", "coefficient"});
      r.get(fn, "form", cc.F.form);
      r.get(fn, "coefficient", cc.F.coefficient);
      r.check(cc.F.form == "linear" || cc.F.form == "saturating", fn, "F form must be linear or saturating");
    }
    r.get(cp, "constant", cc.constant);
    r.check(cc.constant > 0, cp, "coupling constant must be positive");
    c.coupling = cc;
  }

  if (const YAML::Node task = root["task"]; task && r.is_map(task, "task")) {
    r.allow(task, "task", {"eigenfunction", "accumulation", "branch"});
    if (const YAML::Node e = task["eigenfunction"]; e && r.is_map(e, "eigenfunction")) {
      r.allow(e, "task.eigenfunction", {"index", "samples"});
      r.get(e, "index", c.eigenfunction.index);
      r.get(e, "samples", c.eigenfunction.samples);
      r.check(c.eigenfunction.samples >= 2, e, "samples must be at least 2");
    }
    if (const YAML::Node a = task["accumulation"]; a && r.is_map(a, "accumulation")) {
      r.allow(a, "task.accumulation", {"endpoint", "schedule"});
      r.get(a, "endpoint", c.accumulation.endpoint);
      r.get(a, "schedule", c.accumulation.schedule);
      r.check(c.accumulation.endpoint == "plus" || c.accumulation.endpoint == "minus", a,
              "endpoint must be plus or minus");
      r.check(c.accumulation.schedule.size() >= 2, a, "schedule needs at least two points");
    }
    if (const YAML::Node b = task["branch"]; b && r.is_map(b, "branch")) {
      r.allow(b, "task.branch", {"seed_index", "ds", "max_steps", "a_max", "save_solutions", "samples"});
      r.get(b, "seed_index", c.branch.seed_index);
      r.get(b, "ds", c.branch.ds);
      r.get(b, "max_steps", c.branch.max_steps);
      r.get(b, "a_max", c.branch.a_max);
      r.get(b, "save_solutions", c.branch.save_solutions);
      r.get(b, "samples", c.branch.samples);
      r.check(c.branch.ds > 0 && c.branch.max_steps > 0, b, "ds and max_steps must be positive");
    }
  }

  if (const YAML::Node out = root["output"]; out && r.is_map(out, "output")) {
    r.allow(out, "output", {"directory"});
    r.get(out, "directory", c.output_directory);
  }

  if (!r.errors.empty()) {
    std::string msg = "configuration errors:";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw Error(ErrorKind::config, msg);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot read configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c = parse_config(ss.str(), path);
  if (!c.table_file.empty()) {
    std::filesystem::path p(c.table_file);
    if (p.is_relative()) c.table_file = (std::filesystem::path(path).parent_path() / p).string();
  }
  return c;
}

inline DiracRadialParams dirac_params(const RunConfig& c) {
  DiracRadialParams p;
  p.k = c.k;
  p.mu_a = c.mu_a;
  if (c.potential_kind == "pure-coulomb")
    p.potential = coulomb_potential(c.gamma, c.alpha);
  else if (c.potential_kind == "coulomb-with-remainder")
    p.potential = screened_coulomb_potential(c.gamma, c.screening_amplitude, c.screening_length);
  else
    p.potential = read_tabulated_potential(c.table_file);
  return p;
}

inline NonlinearCoupling make_coupling(const CouplingConfig& cc) {
  const GammaForm g = cc.gamma;
  auto gamma = [g](double r) { return g.scale * std::pow(r, g.numerator_power) / (1.0 + std::pow(r, g.denominator_power)); };
  const double a = cc.F.coefficient;
  ScalarFn F;
  if (cc.F.form == "saturating")
    F = [a](double s) { return a * s / (1.0 + std::abs(s)); };
  else
    F = [a](double s) { return a * s; };
  return build_soler_coupling(gamma, F, std::max(std::abs(a), 1e-300), cc.constant);
}

}  // namespace diracgap::config
