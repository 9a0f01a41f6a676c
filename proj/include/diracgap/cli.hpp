#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "diracgap/asymptotics.hpp"
#include "diracgap/bifurcation.hpp"
#include "diracgap/config.hpp"
#include "diracgap/error.hpp"
#include "diracgap/model.hpp"
#include "diracgap/prufer.hpp"
#include "diracgap/spectrum.hpp"

namespace diracgap::cli {

inline constexpr const char* version = "0.1.0";
inline constexpr const char* out_env = "DIRACGAP_OUT";

enum ExitCode { ok = 0, usage = 1, rejected = 2 };

struct Context {
  config::RunConfig cfg;
  std::filesystem::path out_dir;
  bool quiet = false;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;

  std::ostream& log() const {
    static std::ofstream null;
    return quiet ? static_cast<std::ostream&>(null) : *out;
  }
};

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline SpectrumSettings spectrum_settings(const config::RunConfig& c) {
  SpectrumSettings s;
  s.integration.rtol = c.rtol;
  s.integration.atol = c.atol;
  s.tol = c.tolerance;
  s.threads = c.threads;
  return s;
}

inline SampleGrid hypothesis_grid(const config::RunConfig& c) {
  SampleGrid g;
  g.points_per_decade = c.hypothesis_points_per_decade;
  return g;
}

inline CoefficientFamily family_of(const config::RunConfig& c) { return build_dirac_family(config::dirac_params(c)); }

/// Builds the family and rejects it unless every hypothesis holds.
inline CoefficientFamily admissible_family(const config::RunConfig& c) {
  CoefficientFamily f = family_of(c);
  const ZeroClassification zc = classify_zero_endpoint(f);
  require(zc.admissible, ErrorKind::rejected, "family rejected: " + zc.statement);
  const HypothesisReport rep = validate_hypotheses(f, hypothesis_grid(c));
  std::string failed;
  for (const auto& ch : rep.checks)
    if (!ch.passed) failed += (failed.empty() ? "" : ", ") + ch.name;
  require(failed.empty(), ErrorKind::rejected, "family rejected, failed checks: " + failed);
  return f;
}

inline TruncationWindow window_for(const config::RunConfig& c, const CoefficientFamily& f, double lo, double hi) {
  const double delta = c.delta.value_or(1e-4 * (f.mu_plus - f.mu_minus));
  TruncationWindow w{c.window_x0.value_or(1e-4), c.window_x_inf.value_or(1e4), delta, c.epsilon};
  if (!c.window_x0 || !c.window_x_inf) {
    const TruncationWindow sel = select_truncation(f, lo, hi, delta, c.epsilon);
    if (!c.window_x0) w.x0 = sel.x0;
    if (!c.window_x_inf) w.x_inf = sel.x_inf;
  }
  require(w.x0 < w.x_inf, ErrorKind::config, "window needs x0 < x_inf");
  return w;
}

inline std::vector<double> lambda_grid(const config::RunConfig& c) {
  return linear_grid(c.grid.min, c.grid.max, c.grid.points);
}

inline std::string header(const Context& ctx, const std::string& command, const TruncationWindow* w) {
  const auto& c = ctx.cfg;
  std::string h = "# diracgap " + std::string(version) + " " + command + "\n";
  h += "# config " + config::config_hash(c) + "\n";
  h += "# family dirac k=" + std::to_string(c.k) + " mu_a=" + short_num(c.mu_a) + " potential=" + c.potential_kind +
       " gamma=" + short_num(c.gamma) + " alpha=" + short_num(c.alpha) + "\n";
  if (w)
    h += "# window x0=" + short_num(w->x0) + " x_inf=" + short_num(w->x_inf) + " delta=" + short_num(w->delta) +
         " epsilon=" + short_num(w->epsilon) + "\n";
  h += "# tolerances rtol=" + short_num(c.rtol) + " atol=" + short_num(c.atol) + " tol=" + short_num(c.tolerance) +
       "\n";
  return h;
}

inline std::ofstream open_output(const Context& ctx, const std::string& name) {
  std::filesystem::create_directories(ctx.out_dir);
  const auto path = ctx.out_dir / name;
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::config, "cannot write '" + path.string() + "'");
  return os;
}

inline int cmd_check(const Context& ctx) {
  const auto& c = ctx.cfg;
  const CoefficientFamily f = family_of(c);
  const ZeroClassification zc = classify_zero_endpoint(f);
  HypothesisReport rep = validate_hypotheses(f, hypothesis_grid(c));
  rep.checks.push_back({"zero-endpoint-classification", zc.admissible, zc.det_p_star, zc.statement});
  if (c.coupling) {
    HypothesisCheck ch{"coupling", true, 0.0, "soler coupling accepted"};
    try {
      (void)config::make_coupling(*c.coupling);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::rejected) throw;
      ch.passed = false;
      ch.detail = e.what();
    }
    rep.checks.push_back(ch);
  }

  auto os = open_output(ctx, "check.csv");
  os << header(ctx, "check", nullptr) << "check,passed,measured,detail\n";
  for (const auto& ch : rep.checks) {
    std::string d = ch.detail;
    std::replace(d.begin(), d.end(), ',', ';');
    os << ch.name << ',' << (ch.passed ? 1 : 0) << ',' << num(ch.measured) << ',' << d << '\n';
  }

  auto& log = ctx.log();
  for (const auto& ch : rep.checks)
    log << (ch.passed ? "  pass  " : "  FAIL  ") << ch.name << ": " << ch.detail << '\n';
  const bool pass = rep.all_passed();
  log << (pass ? "family admissible" : "family rejected") << '\n';
  return pass ? ok : rejected;
}

inline int cmd_spectrum(const Context& ctx) {
  const auto& c = ctx.cfg;
  const CoefficientFamily f = admissible_family(c);
  const auto grid = lambda_grid(c);
  auto os = open_output(ctx, "spectrum.csv");
  auto ns = open_output(ctx, "nu_star.csv");
  if (grid.empty()) {
    os << header(ctx, "spectrum", nullptr) << "k,lambda,rot,nodal_index,residual,decay_inf,decay_zero\n";
    ns << header(ctx, "spectrum", nullptr) << "lambda,nu_star\n";
    ctx.log() << "empty lambda grid, no eigenvalues\n";
    return ok;
  }
  const TruncationWindow w = window_for(c, f, grid.front(), grid.back());
  const SpectrumResult r = compute_spectrum(f, grid, w, spectrum_settings(c));

  os << header(ctx, "spectrum", &w) << "k,lambda,rot,nodal_index,residual,decay_inf,decay_zero\n";
  for (const auto& rec : r.records)
    os << rec.k << ',' << num(rec.lambda) << ',' << num(rec.rot) << ',' << rec.nodal_index << ','
       << num(rec.residual) << ',' << num(rec.decay.exponent_at_inf) << ',' << num(rec.decay.exponent_at_zero)
       << '\n';
  ns << header(ctx, "spectrum", &w) << "lambda,nu_star\n";
  for (std::size_t i = 0; i < r.scan.grid.size(); ++i) ns << num(r.scan.grid[i]) << ',' << num(r.scan.nu_star[i]) << '\n';

  auto& log = ctx.log();
  log << r.records.size() << " eigenvalue(s) in [" << short_num(grid.front()) << ", " << short_num(grid.back())
      << "], window [" << short_num(w.x0) << ", " << short_num(w.x_inf) << "]\n";
  char buf[160];
  for (const auto& rec : r.records) {
    std::snprintf(buf, sizeof buf, "  k=%-3d lambda=%.12f  rot=%.6f  nodal=%d  residual=%.2e%s\n", rec.k, rec.lambda,
                  rec.rot, rec.nodal_index, rec.residual, rec.boundary_flag ? "  (boundary)" : "");
    log << buf;
  }
  return ok;
}

inline const EigenvalueRecord& record_with_index(const SpectrumResult& r, int index) {
  for (const auto& rec : r.records)
    if (rec.k == index) return rec;
  throw Error(ErrorKind::rejected, "no eigenvalue with index " + std::to_string(index) + " on the lambda grid");
}

inline int cmd_eigenfunction(const Context& ctx) {
  const auto& c = ctx.cfg;
  const CoefficientFamily f = admissible_family(c);
  const auto grid = lambda_grid(c);
  require(!grid.empty(), ErrorKind::config, "eigenfunction needs a nonempty lambda grid");
  const TruncationWindow w = window_for(c, f, grid.front(), grid.back());
  const SpectrumSettings s = spectrum_settings(c);
  const SpectrumResult r = compute_spectrum(f, grid, w, s);
  const EigenvalueRecord& rec = record_with_index(r, c.eigenfunction.index);
  const EigenfunctionResult e = eigenfunction(f, rec, c.eigenfunction.samples, s.integration);

  const std::string h = header(ctx, "eigenfunction", &w) + "# lambda=" + num(rec.lambda) +
                        " k=" + std::to_string(rec.k) + " decay_inf=" + num(rec.decay.exponent_at_inf) +
                        " decay_zero=" + num(rec.decay.exponent_at_zero) + "\n";
  auto os = open_output(ctx, "eigenfunction.csv");
  os << h << "x,u,v\n";
  for (const auto& p : e.samples) os << num(p.x) << ',' << num(p.u) << ',' << num(p.v) << '\n';

  auto ts = open_output(ctx, "trajectory.csv");
  ts << h << "x,theta,logrho\n";
  std::vector<double> xs;
  for (const auto& st : e.forward.states()) xs.push_back(st.x);
  for (const auto& st : e.backward.states())
    if (st.x > e.x_mid) xs.push_back(st.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double x : xs) {
    const PruferState st = e.at(x);
    ts << num(x) << ',' << num(st.theta) << ',' << num(st.logrho) << '\n';
  }

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "eigenfunction k=%d lambda=%.12f\n  decay at infinity %.6f (expected %.6f)\n  growth at zero %.6f "
                "(expected %.6f)\n",
                rec.k, rec.lambda, rec.decay.exponent_at_inf, rec.decay.expected_inf, rec.decay.exponent_at_zero,
                rec.decay.expected_zero);
  ctx.log() << buf;
  return ok;
}

inline int cmd_accumulation(const Context& ctx) {
  const auto& c = ctx.cfg;
  const CoefficientFamily f = admissible_family(c);
  const TruncationWindow w = window_for(c, f, c.grid.min, c.grid.max);
  const Endpoint ep = c.accumulation.endpoint == "minus" ? Endpoint::mu_minus : Endpoint::mu_plus;
  IntegrationSettings set = spectrum_settings(c).integration;
  const AccumulationVerdict v = detect_accumulation(f, ep, c.accumulation.schedule, w.x0, c.epsilon, set);

  auto os = open_output(ctx, "accumulation.csv");
  os << header(ctx, "accumulation", &w) << "# endpoint=" << c.accumulation.endpoint
     << " verdict=" << to_string(v.verdict) << "\n"
     << "X,theta\n";
  for (std::size_t i = 0; i < v.X.size(); ++i) os << num(v.X[i]) << ',' << num(v.theta[i]) << '\n';
  ctx.log() << "endpoint " << c.accumulation.endpoint << ": " << to_string(v.verdict) << " (" << v.detail << ")\n";
  return ok;
}

inline int cmd_branch(const Context& ctx) {
  const auto& c = ctx.cfg;
  require(c.coupling.has_value(), ErrorKind::config, "branch needs a 'coupling' block");
  const CoefficientFamily f = admissible_family(c);
  const NonlinearCoupling coupling = config::make_coupling(*c.coupling);
  const auto grid = lambda_grid(c);
  require(!grid.empty(), ErrorKind::config, "branch needs a nonempty lambda grid");
  const TruncationWindow w = window_for(c, f, grid.front(), grid.back());
  const SpectrumResult r = compute_spectrum(f, grid, w, spectrum_settings(c));
  const EigenvalueRecord& seed = record_with_index(r, c.branch.seed_index);

  ContinuationSettings cs;
  cs.a_max = c.branch.a_max;
  cs.n_samples = c.branch.samples;
  const Branch br = continue_branch(f, coupling, seed, c.branch.ds, c.branch.max_steps, cs);

  const std::string h = header(ctx, "branch", &w) + "# seed k=" + std::to_string(seed.k) +
                        " lambda=" + num(seed.lambda) + " termination=" + to_string(br.termination) + "\n";
  auto os = open_output(ctx, "branch.csv");
  os << h << "step,lambda,amplitude,l2norm,j,i,residual\n";
  for (std::size_t n = 0; n < br.points.size(); ++n) {
    const BranchPoint& p = br.points[n];
    os << n + 1 << ',' << num(p.lambda) << ',' << num(p.amplitude) << ',' << num(p.l2norm) << ',' << num(p.j) << ','
       << p.i << ',' << num(p.bvp_residual) << '\n';
  }
  for (int step : c.branch.save_solutions) {
    if (step < 1 || step > static_cast<int>(br.points.size())) continue;
    char name[48];
    std::snprintf(name, sizeof name, "solution_step%03d.csv", step);
    auto ss = open_output(ctx, name);
    ss << h << "# step=" << step << "\nx,u,v\n";
    for (const auto& p : br.points[step - 1].samples) ss << num(p.x) << ',' << num(p.u) << ',' << num(p.v) << '\n';
  }

  auto& log = ctx.log();
  log << "branch from k=" << seed.k << " lambda=" << short_num(seed.lambda) << ": " << br.points.size()
      << " point(s), termination " << to_string(br.termination);
  if (!br.termination_detail.empty()) log << " (" << br.termination_detail << ")";
  log << "\n";
  if (!br.points.empty()) {
    const BranchPoint& last = br.points.back();
    log << "  last a=" << short_num(last.amplitude) << " lambda=" << short_num(last.lambda) << " i=" << last.i
        << "\n  lambda(a->0) extrapolated " << short_num(br.lambda_extrapolated) << "\n";
  }
  if (br.points.empty()) {
    *ctx.err << "error: no branch points computed\n";
    return rejected;
  }
  if (br.index_violations > 0) {
    *ctx.err << "error: index changed at " << br.index_violations << " point(s)\n";
    return rejected;
  }
  return ok;
}

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument:
    case ErrorKind::config:
      return usage;
    default:
      return rejected;
  }
}

/// Parses arguments, dispatches one subcommand and maps failures to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Gap eigenvalues, rotation numbers and bifurcation branches of radial Dirac systems", "diracgap"};
  std::string config_path, out_dir;
  bool quiet = false;
  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--out", out_dir, "output directory (overrides " + std::string(out_env) + " and the config)");
  app.add_flag("--quiet", quiet, "suppress the summary on stdout");
  app.set_version_flag("--version", version);
  app.require_subcommand(1, 1);
  app.fallthrough();
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"check", "validate the hypotheses on the coefficient family"},
      {"spectrum", "gap eigenvalues with rotation and nodal indices"},
      {"eigenfunction", "normalized eigenfunction and its Pruefer trajectory"},
      {"accumulation", "eigenvalue accumulation at a gap edge"},
      {"branch", "continue a nonlinear branch from a linear eigenvalue"}};
  for (const auto& [name, help] : cmds) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  Context ctx;
  ctx.quiet = quiet;
  ctx.out = &out;
  ctx.err = &err;
  try {
    ctx.cfg = config::load_config(config_path);
    if (!out_dir.empty())
      ctx.out_dir = out_dir;
    else if (const char* env = std::getenv(out_env); env && *env)
      ctx.out_dir = env;
    else
      ctx.out_dir = ctx.cfg.output_directory;

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "check") return cmd_check(ctx);
    if (cmd == "spectrum") return cmd_spectrum(ctx);
    if (cmd == "eigenfunction") return cmd_eigenfunction(ctx);
    if (cmd == "accumulation") return cmd_accumulation(ctx);
    return cmd_branch(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return rejected;
  }
}

}  // namespace diracgap::cli
