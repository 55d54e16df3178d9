#pragma once

// Subcommands of the wzmarcus tool. Each returns a process exit code:
// 0 ok, 2 configuration error, 3 assertion failed, 4 divergence abort.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wz/config.hpp"
#include "wz/experiments.hpp"
#include "wz/flows.hpp"
#include "wz/io.hpp"
#include "wz/levy.hpp"
#include "wz/rate_fit.hpp"
#include "wz/scheme.hpp"

namespace wz::cli {

inline constexpr const char* kToolName = "wzmarcus";
inline constexpr const char* kVersion = "0.3.1";

enum ExitCode : int { kOk = 0, kConfigError = 2, kAssertionFailed = 3, kDivergence = 4 };

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::optional<std::pair<double, double>> assert_slope;
  bool trace = false;
  std::string invocation;
};

/// Parses "LO,HI".
inline std::pair<double, double> parse_band(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("--assert-slope", "expected LO,HI");
  try {
    std::size_t used = 0;
    const double lo = std::stod(s.substr(0, comma), &used);
    const double hi = std::stod(s.substr(comma + 1));
    if (!(lo <= hi)) throw ConfigError("--assert-slope", "LO must not exceed HI");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError("--assert-slope", "expected two numbers LO,HI");
  }
}

/// Loads a config file; a manifest.json written by an earlier run is also
/// accepted and replays its resolved config.
inline RunConfig load_run_config(const Options& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config", "required");
  const std::string text = [&] {
    try {
      return io::read_file(opt.config_path);
    } catch (const std::runtime_error&) {
      throw ConfigError("--config", "cannot open '" + opt.config_path + "'");
    }
  }();
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  if (root.is_object() && root.contains("tool") && root.contains("config")) root = root.at("config");
  RunConfig rc;
  try {
    rc = parse_config(root);
  } catch (const json::exception& e) {
    throw ConfigError("<root>", std::string("type error: ") + e.what());
  }
  if (opt.seed) rc.experiment.seed = *opt.seed;
  rc.experiment.threads = std::max(1u, opt.threads);
  return rc;
}

namespace detail {

inline json curve_json(const ErrorCurve& c) {
  json pts = json::array();
  for (const auto& p : c.points) pts.push_back({{"h", p.h}, {"error", p.error}, {"ci", p.ci_half}, {"M", p.paths}});
  return {{"reference", c.reference}, {"p", c.p}, {"scheme_exact", c.scheme_exact},
          {"diverged_paths", c.diverged_paths}, {"points", pts}, {"notes", c.notes}};
}

inline std::string curve_csv(const ErrorCurve& c) {
  io::CsvWriter w({"h", "error", "ci", "M"});
  for (const auto& p : c.points) w.row({p.h, p.error, p.ci_half, static_cast<double>(p.paths)});
  return w.str();
}

struct FitOutcome {
  json report;
  std::optional<double> slope;
};

// Fit with the exclusion rules spelled out in the report.
inline FitOutcome fit_report(const ErrorCurve& curve, double floor) {
  FitOutcome out;
  json& r = out.report;
  r["exclusion_rules"] = {"scheme-exact families are not rate-fitted",
                          "points with error <= fit_floor are excluded",
                          "paths stopped by the divergence guard are excluded and counted"};
  r["fit_floor"] = floor;
  if (curve.scheme_exact) {
    r["fitted"] = false;
    r["reason"] = "scheme-exact family";
    return out;
  }
  try {
    const RateFit f = fit_rate(curve, floor);
    r["fitted"] = true;
    r["slope"] = f.slope;
    r["intercept"] = f.intercept;
    r["r_squared"] = f.r_squared;
    r["weighted"] = f.weighted;
    r["residuals"] = f.residuals;
    json used = json::array(), excluded = json::array();
    for (auto i : f.used) used.push_back(curve.points[i].h);
    for (auto i : f.excluded) excluded.push_back(curve.points[i].h);
    r["used_h"] = used;
    r["excluded_h"] = excluded;
    out.slope = f.slope;
  } catch (const TooFewPoints& e) {
    r["fitted"] = false;
    r["reason"] = e.what();
  }
  return out;
}

// Applies --assert-slope; records the verdict in the report.
inline int check_band(const Options& opt, FitOutcome& fit, std::ostream& log) {
  if (!opt.assert_slope) return kOk;
  const auto [lo, hi] = *opt.assert_slope;
  fit.report["asserted_band"] = {lo, hi};
  const bool ok = fit.slope && *fit.slope >= lo && *fit.slope <= hi;
  fit.report["assertion_passed"] = ok;
  if (!ok) {
    log << "assertion failed: slope ";
    if (fit.slope) log << io::format_number(*fit.slope);
    else log << "(not fitted)";
    log << " outside [" << lo << ", " << hi << "]\n";
    return kAssertionFailed;
  }
  return kOk;
}

inline std::string trace_csv(const PathErrorTable& table) {
  std::vector<std::string> header = {"path", "diverged"};
  for (double h : table.steps) header.push_back("err_h" + io::format_number(h));
  io::CsvWriter w(header);
  for (std::size_t i = 0; i < table.errors.size(); ++i) {
    std::vector<double> row = {static_cast<double>(i), static_cast<double>(table.diverged[i])};
    for (std::size_t c = 0; c < table.steps.size(); ++c)
      row.push_back(table.errors[i].empty() ? 0.0 : table.errors[i][c]);
    w.row(row);
  }
  return w.str();
}

}  // namespace detail

/// Writes resolved_config.json and, last, manifest.json.
class Run {
 public:
  Run(const Options& opt, const RunConfig& rc) : opt_(opt), rc_(rc), out_(opt.out_dir), started_(io::utc_timestamp()) {}

  io::OutputDir& out() { return out_; }

  void finish() {
    out_.write_json("resolved_config.json", to_json(rc_));
    json m;
    m["tool"] = kToolName;
    m["version"] = kVersion;
    m["command"] = opt_.command;
    m["invocation"] = opt_.invocation;
    m["seed"] = rc_.experiment.seed;
    m["threads"] = rc_.experiment.threads;
    m["started"] = started_;
    m["finished"] = io::utc_timestamp();
    m["config"] = to_json(rc_);
    m["outputs"] = out_.digests();
    std::ofstream(out_.path() / "manifest.json") << m.dump(2) << "\n";
  }

 private:
  const Options& opt_;
  const RunConfig& rc_;
  io::OutputDir out_;
  std::string started_;
};

inline json config_echo(const RunConfig& rc) {
  return {{"seed", rc.experiment.seed}, {"config", to_json(rc)}};
}

// ---------------------------------------------------------------------------

inline int cmd_levy_check(const Options& opt, const RunConfig& rc, std::ostream& log) {
  const ExperimentConfig& e = rc.experiment;
  const ConstantEstimates est = estimate_constants(e.coeffs, std::max(e.ball_radius, 1.0) * 4.0, 400, e.moment_margin);
  const double p = rc.lemma_p;
  const int d = e.coeffs.d;
  json checks = json::array();
  bool all_ok = true;
  const std::pair<std::string, double> required[] = {
      {"p*||Dc||", p * est.norm_Dc}, {"p*K", p * est.K}, {"2*d*K", 2.0 * d * est.K}};
  for (const auto& [name, A] : required) {
    json c = {{"condition", "exponential integrability at A = " + name}, {"A", A}, {"margin", e.moment_margin}};
    try {
      c["integral"] = exp_moment_check(e.model, A);
      c["integral_with_margin"] = exp_moment_check(e.model, A + e.moment_margin);
      c["passed"] = true;
    } catch (const MomentDivergence& err) {
      c["passed"] = false;
      c["error"] = err.what();
      all_ok = false;
      log << "FAIL " << c["condition"].get<std::string>() << " (A + margin = " << A + e.moment_margin
          << "): " << err.what() << "\n";
    }
    checks.push_back(c);
  }

  json lemma;
  lemma["p"] = p;
  lemma["kappa1"] = est.kappa1;
  lemma["kappa2"] = est.kappa2;
  lemma["K"] = est.K;
  lemma["paths"] = rc.lemma_paths;
  try {
    const auto pts = moment_lemma_check(e.model, p, est.kappa1, est.kappa2, est.K, rc.lemma_steps,
                                        rc.lemma_paths, e.seed);
    json arr = json::array();
    double lo = INFINITY, hi = 0.0;
    for (const auto& pt : pts) {
      arr.push_back({{"h", pt.h}, {"ratio", pt.ratio}, {"ci", pt.ci_half}});
      lo = std::min(lo, pt.ratio);
      hi = std::max(hi, pt.ratio);
    }
    lemma["points"] = arr;
    lemma["ratio_spread"] = lo > 0.0 ? hi / lo : INFINITY;
  } catch (const MomentDivergence& err) {
    lemma["skipped"] = err.what();
  }

  json report;
  report["constants"] = {{"norm_Da", est.norm_Da}, {"norm_Db", est.norm_Db}, {"norm_Dc", est.norm_Dc},
                         {"kappa1", est.kappa1},   {"kappa2", est.kappa2},   {"K", est.K},
                         {"probes", est.probes},   {"margin", est.margin}};
  report["lambda"] = e.model.intensity;
  report["jump_law"] = e.model.jumps.kind();
  report["bounded_support"] = e.model.jumps.bounded_support();
  report["exp_moment_checks"] = checks;
  report["moment_lemma"] = lemma;
  report["passed"] = all_ok;
  report["run"] = config_echo(rc);

  Run run(opt, rc);
  run.out().write_json("levy_check.json", report);
  run.finish();
  log << (all_ok ? "all exponential-moment checks passed\n" : "required exponential moments diverge\n");
  return all_ok ? kOk : kAssertionFailed;
}

inline int cmd_simulate(const Options& opt, const RunConfig& rc, std::ostream& log) {
  const ExperimentConfig& e = rc.experiment;
  const double h = e.ladder().back();
  const DrivingPath path = sample_path(e.model, e.horizon, e.level, e.seed, rc.path_index);
  const KnotTrajectory tr = wz_knots(e.coeffs, path, e.x0, h, e.ode);
  const bool with_ref = e.reference != ReferenceKind::kNone;
  std::vector<Vector> ref;
  if (with_ref) ref = wz::detail::reference_states(e, path, e.x0, tr.times);

  std::vector<std::string> header = {"t"};
  for (int j = 0; j < e.coeffs.d; ++j) header.push_back("X" + std::to_string(j + 1));
  if (with_ref)
    for (int j = 0; j < e.coeffs.d; ++j) header.push_back("ref_X" + std::to_string(j + 1));
  io::CsvWriter w(header);
  double max_rel = 0.0, max_abs = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    std::vector<double> row = {tr.times[k]};
    for (int j = 0; j < e.coeffs.d; ++j) row.push_back(tr.states[k][j]);
    if (with_ref) {
      for (int j = 0; j < e.coeffs.d; ++j) row.push_back(ref[k][j]);
      const double err = (tr.states[k] - ref[k]).norm();
      max_abs = std::max(max_abs, err);
      max_rel = std::max(max_rel, err / std::max(ref[k].norm(), 1e-300));
    }
    w.row(row);
  }

  json report;
  report["h"] = h;
  report["knots"] = tr.size();
  report["path_index"] = rc.path_index;
  report["jumps"] = path.jumps.size();
  report["reference"] = to_string(e.reference);
  if (with_ref) {
    report["max_abs_deviation"] = max_abs;
    report["max_relative_deviation"] = max_rel;
  }
  report["final_state"] = config_detail::vector_to(tr.states.back());
  report["run"] = config_echo(rc);

  Run run(opt, rc);
  run.out().write("trajectory.csv", w.str());
  run.out().write_json("report.json", report);
  run.finish();
  log << "simulated " << tr.size() << " knots at h = " << h;
  if (with_ref) log << "; max relative deviation from " << to_string(e.reference) << " = " << max_rel;
  log << "\n";
  return kOk;
}

inline int cmd_converge(const Options& opt, const RunConfig& rc, std::ostream& log) {
  const ExperimentConfig& e = rc.experiment;
  const PathErrorTable table = strong_error_table(e);
  Run run(opt, rc);
  if (opt.trace) run.out().write("trace.csv", detail::trace_csv(table));
  wz::detail::check_abort(e, table);
  ErrorCurve curve = curve_from_table(e, table);
  for (auto& n : integrability_notes(e, std::max(2.0, e.p))) curve.notes.push_back(std::move(n));
  ExperimentConfig e2 = e;
  e2.p = 2.0;
  const ErrorCurve l2 = curve_from_table(e2, table);

  auto fit = detail::fit_report(curve, rc.fit_floor);
  const int code = detail::check_band(opt, fit, log);
  json report = fit.report;
  report["curve"] = detail::curve_json(curve);
  report["l2_curve"] = detail::curve_json(l2);
  if (auto f2 = detail::fit_report(l2, rc.fit_floor).report; f2.value("fitted", false)) report["l2_slope"] = f2["slope"];
  report["run"] = config_echo(rc);

  run.out().write("curve.csv", detail::curve_csv(curve));
  run.out().write("curve_l2.csv", detail::curve_csv(l2));
  run.out().write_json("fit.json", report);
  run.finish();
  for (const auto& p : curve.points)
    log << "h = " << io::format_number(p.h) << "  error = " << p.error << " +- " << p.ci_half << "\n";
  if (fit.slope) log << "slope " << *fit.slope << "  r2 " << report["r_squared"].get<double>() << "\n";
  return code;
}

inline int cmd_uniform(const Options& opt, const RunConfig& rc, std::ostream& log) {
  const ExperimentConfig& e = rc.experiment;
  const UniformResult res = uniform_error(e);
  auto fit = detail::fit_report(res.uniform, rc.fit_floor);
  const int code = detail::check_band(opt, fit, log);
  json report = fit.report;
  report["theorem_exponent"] = res.theorem_exponent;
  report["rate_epsilon"] = e.rate_epsilon;
  report["lattice_points"] = res.lattice_points;
  report["lattice_spacing"] = res.lattice_spacing;
  report["ball_radius"] = e.ball_radius;
  report["gap_radius"] = res.gap_radius;
  report["curve"] = detail::curve_json(res.uniform);
  report["pointwise_curve"] = detail::curve_json(res.pointwise);
  report["run"] = config_echo(rc);

  Run run(opt, rc);
  run.out().write("curve.csv", detail::curve_csv(res.uniform));
  run.out().write("pointwise.csv", detail::curve_csv(res.pointwise));
  run.out().write_json("fit.json", report);
  run.finish();
  for (std::size_t i = 0; i < res.uniform.points.size(); ++i)
    log << "h = " << io::format_number(res.uniform.points[i].h) << "  uniform = " << res.uniform.points[i].error
        << "  pointwise = " << res.pointwise.points[i].error << "\n";
  if (fit.slope) log << "slope " << *fit.slope << "  (theorem exponent " << res.theorem_exponent << ")\n";
  return code;
}

inline int cmd_weak(const Options& opt, const RunConfig& rc, std::ostream& log) {
  const ExperimentConfig& e = rc.experiment;
  Observable f;
  try {
    f = observable_from(rc.observable);
  } catch (const DomainError& err) {
    throw ConfigError("experiment.observable", err.what());
  }
  const WeakResult res = weak_error(e, f);
  auto fit = detail::fit_report(res.curve, rc.fit_floor);
  const int code = detail::check_band(opt, fit, log);
  json report = fit.report;
  report["observable"] = rc.observable;
  report["drowned_h"] = res.drowned_steps;
  report["curve"] = detail::curve_json(res.curve);
  report["run"] = config_echo(rc);

  Run run(opt, rc);
  run.out().write("curve.csv", detail::curve_csv(res.curve));
  run.out().write_json("fit.json", report);
  run.finish();
  for (const auto& n : res.curve.notes) log << n << "\n";
  return code;
}

/// Dispatches to a subcommand and maps failures onto exit codes.
inline int run(const Options& opt, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    const RunConfig rc = load_run_config(opt);
    if (opt.command == "levy-check") return cmd_levy_check(opt, rc, log);
    if (opt.command == "simulate") return cmd_simulate(opt, rc, log);
    if (opt.command == "converge") return cmd_converge(opt, rc, log);
    if (opt.command == "uniform") return cmd_uniform(opt, rc, log);
    if (opt.command == "weak") return cmd_weak(opt, rc, log);
    err << "unknown command '" << opt.command << "'\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error at " << e.field() << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const ExperimentAborted& e) {
    err << "aborted: " << e.what() << "\n";
    return kDivergence;
  } catch (const FlowDivergence& e) {
    err << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace wz::cli
