#ifndef RESCALE_CLI_HPP
#define RESCALE_CLI_HPP

#include "rescale/csv.hpp"
#include "rescale/experiments.hpp"
#include "rescale/instances.hpp"
#include "rescale/minimizers.hpp"
#include "rescale/reference_optimum.hpp"
#include "rescale/separators.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rescale::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kNoCertificate = 2,  // MaxIterations
  kCurvature = 3,      // CurvatureFailure
  kUsage = 64,
};

inline int exit_code(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::MaxIterations: return kNoCertificate;
    case OutcomeKind::CurvatureFailure: return kCurvature;
    default: return kOk;
  }
}

/// Thrown for bad flag values that CLI11 cannot check itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string instance;
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string format = "csv";
};

struct SeparateOptions {
  CommonOptions common;
  std::string algo;
  std::int64_t max_iter = 10000;
  double tol = 1e-12;
  double beta = 2.0;
  std::size_t start = 0;
};

struct MinimizeOptions {
  CommonOptions common;
  std::string method;
  std::string fstar = "none";
  std::string x;
  std::int64_t max_iter = 2000;
  double tol = 1e-6;
  double step_tol = 1e-12;
};

struct ExperimentCliOptions {
  std::string figure;
  std::optional<std::size_t> runs;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> max_iter;
  std::string h0 = "wishart";
  std::string out_dir;
  unsigned threads = 0;
};

namespace detail {

inline Vector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in --x");
    }
    if (used != item.size()) throw UsageError("bad number '" + item + "' in --x");
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--x needs at least one coordinate");
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

inline InstanceSpec load_instance(const std::string& text) {
  try {
    return parse_instance(text);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

inline void write_output(const std::string& path, const std::string& format, const RunTrace& trace,
                         const InstanceSpec& spec, const std::string& algorithm, std::ostream& out) {
  std::ostringstream body;
  if (format == "json") {
    nlohmann::json j = trace_to_json(trace);
    j["instance"] = to_json(spec);
    j["algorithm"] = algorithm;
    body << j.dump(2) << '\n';
  } else {
    write_trace_csv(body, trace);
  }
  if (path == "-") {
    out << body.str();
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  file << body.str();
}

inline bool is_point_family(const std::string& family) {
  return family == "simplex" || family == "points" || family == "segment";
}

inline bool is_ellipsoid_family(const std::string& family) {
  return family == "ellipsoid" || family == "failure-r2";
}

inline RunTrace run_separator(const SeparateOptions& o, const InstanceSpec& spec) {
  SeparatorConfig cfg;
  cfg.max_iterations = o.max_iter;
  cfg.step_tol = o.tol;
  cfg.dilation_beta = o.beta;
  cfg.seed = o.common.seed;
  cfg.start_index = o.start;
  const auto unsupported = [&] {
    return UsageError("--algo " + o.algo + " does not accept a " + spec.family + " instance");
  };

  if (is_point_family(spec.family)) {
    const FiniteSetOracle q = instance_points(spec);
    if (o.algo == "shor") return shor_separate(q, cfg);
    if (o.algo == "shor-rand") return randomized_shor_separate(q, cfg);
    if (o.algo == "bfgs") return bfgs_separate_hull(q, cfg);
    if (o.algo == "bfgs-chol") return cholesky_bfgs_separate(q.points(), cfg);
    if (o.algo == "ellipsoid") return ellipsoid_separate(q, cfg);
    if (o.algo == "segment") {
      if (q.size() != 2) throw UsageError("--algo segment needs exactly two points");
      return segment_separate(q[0], q[1], cfg);
    }
  } else if (is_ellipsoid_family(spec.family)) {
    const EllipsoidInstance e = instance_ellipsoid(spec);
    if (o.algo == "shor") return shor_separate_ellipsoid(e.A, e.c, e.start, cfg);
    const EllipsoidOracle oracle(e.A, e.c);
    if (o.algo == "shor-rand") return randomized_shor_separate(oracle, cfg);
    if (o.algo == "bfgs") return bfgs_separate(oracle, Vector(e.A * e.start - e.c), cfg);
  } else if (spec.family == "unitball") {
    const UnitBallInstance u = instance_unit_ball(spec);
    if (o.algo == "bfgs") return unit_ball_iteration(u.g0, u.H0, cfg);
  }
  throw unsupported();
}

inline std::unique_ptr<ObjectiveOracle> make_objective(const InstanceSpec& spec) {
  if (spec.family == "maxquad") return std::make_unique<MaxQuadObjective>(instance_max_quadratics(spec));
  if (spec.family == "quad") return std::make_unique<QuadraticObjective>(instance_quadratic_factor(spec));
  if (spec.family == "norm") {
    const double n = spec.params.value("n", 5.0);
    if (!(n >= 1.0)) throw UsageError("norm instance needs n >= 1");
    return std::make_unique<NormObjective>(static_cast<Index>(n));
  }
  if (is_point_family(spec.family)) return std::make_unique<SupportFunctionObjective>(instance_points(spec));
  throw UsageError("instance family '" + spec.family + "' is not an objective");
}

inline std::optional<double> resolve_fstar(const std::string& text, const InstanceSpec& spec) {
  if (text == "none") return std::nullopt;
  if (text == "auto") {
    if (spec.family == "maxquad") return reference_optimum(instance_max_quadratics(spec)).f_star;
    if (spec.family == "quad" || spec.family == "norm") return 0.0;
    throw UsageError("--fstar auto is not available for " + spec.family + " instances");
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError("--fstar must be auto, none or a number");
  }
  if (used != text.size()) throw UsageError("--fstar must be auto, none or a number");
  return v;
}

inline RunTrace run_minimizer(const MinimizeOptions& o, const InstanceSpec& spec) {
  const auto f = make_objective(spec);
  const Index n = f->dimension();
  Vector x;
  if (o.x.empty()) {
    Rng rng(o.common.seed);
    x = random_normal_vector(n, rng);
  } else {
    x = parse_vector(o.x);
    if (x.size() != n) throw UsageError("--x has " + std::to_string(x.size()) + " coordinates, instance has " +
                                        std::to_string(n));
  }
  MinimizerConfig cfg;
  cfg.max_iterations = o.max_iter;
  cfg.gap_tol = o.tol;
  cfg.step_tol = o.step_tol;
  cfg.f_star = resolve_fstar(o.fstar, spec);
  const SpdMatrix H0 = SpdMatrix::identity(n);
  if (o.method == "lf-bfgs") return linesearch_free_bfgs(*f, x, H0, cfg).trace;
  if (o.method == "fixed-point") return fixed_point_bfgs_descent(*f, x, H0, cfg).trace;
  const Vector g0 = f->subgradient(x, Vector::Zero(n));
  return fixed_point_bfgs_nonsmooth(*f, x, g0, H0, cfg).trace;
}

inline void add_common(CLI::App& cmd, CommonOptions& c) {
  cmd.add_option("--instance", c.instance, "Instance: family:key=value,... or @file.json")->required();
  cmd.add_option("--seed", c.seed, "Random seed for randomized algorithms and start points");
  cmd.add_option("--out", c.out, "Trace output path, - for standard output");
  cmd.add_option("--format", c.format, "Trace format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace detail

inline std::string families_help() {
  std::string out = "Instance families:";
  for (const auto& f : known_families()) out += " " + f;
  return out;
}

/// Runs the command line (arguments exclude the program name) and returns the exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metric-rescaling separators, minimizers and figure experiments", "rescale"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.footer(families_help() + "\nExit codes: 0 success, 1 runtime error, 2 iteration limit, "
             "3 curvature failure, 64 usage error.\nRESCALE_OUT_DIR sets the default experiment directory.");

  SeparateOptions sep;
  auto* separate = app.add_subcommand("separate", "Decide whether 0 lies in a convex set");
  separate->add_option("--algo", sep.algo, "Separator")
      ->required()
      ->check(CLI::IsMember({"shor", "shor-rand", "bfgs", "bfgs-chol", "ellipsoid", "segment"}));
  detail::add_common(*separate, sep.common);
  separate->add_option("--max-iter", sep.max_iter, "Iteration limit")->check(CLI::PositiveNumber);
  separate->add_option("--tol", sep.tol, "Step tolerance")->check(CLI::PositiveNumber);
  separate->add_option("--beta", sep.beta, "Dilation beta (> 1)");
  separate->add_option("--start", sep.start, "Index of the starting point in a finite set");

  MinimizeOptions min;
  auto* minimize = app.add_subcommand("minimize", "Minimize a convex objective without line search");
  minimize->add_option("--method", min.method, "Minimizer")
      ->required()
      ->check(CLI::IsMember({"lf-bfgs", "fixed-point", "fixed-point-nonsmooth"}));
  detail::add_common(*minimize, min.common);
  minimize->add_option("--fstar", min.fstar, "Optimal value: auto, none or a number");
  minimize->add_option("--x", min.x, "Start point x1,x2,... (default: Gaussian from --seed)");
  minimize->add_option("--max-iter", min.max_iter, "Iteration limit")->check(CLI::PositiveNumber);
  minimize->add_option("--tol", min.tol, "Gap tolerance when f* is known")->check(CLI::PositiveNumber);
  minimize->add_option("--step-tol", min.step_tol, "Step tolerance")->check(CLI::PositiveNumber);

  ExperimentCliOptions exp;
  auto* experiment = app.add_subcommand("experiment", "Run a figure experiment and write its CSV files");
  experiment->add_option("--figure", exp.figure, "Figure id")->required()->check(CLI::IsMember(figure_ids()));
  experiment->add_option("--runs", exp.runs, "Number of runs (figure default when omitted)");
  experiment->add_option("--seed", exp.seed, "Base seed");
  experiment->add_option("--max-iter", exp.max_iter, "Iteration limit (figure default when omitted)");
  experiment->add_option("--h0", exp.h0, "Initial metric for fig7/fig8")
      ->check(CLI::IsMember({"wishart", "lognormal", "identity"}));
  experiment->add_option("--out-dir", exp.out_dir, "Output directory (default $RESCALE_OUT_DIR or .)");
  experiment->add_option("--threads", exp.threads, "Worker threads, 0 for all cores");

  const auto usage = [&](const std::string& message) {
    err << "error: " << message << "\n\n";
    CLI::App* active = &app;
    for (auto* sub : {separate, minimize, experiment})
      if (sub->parsed()) active = sub;
    err << active->help();
    return static_cast<int>(kUsage);
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return usage(e.what());
  }

  try {
    if (separate->parsed()) {
      if (!(sep.beta > 1.0)) throw UsageError("--beta must exceed 1");
      const InstanceSpec spec = detail::load_instance(sep.common.instance);
      const RunTrace trace = detail::run_separator(sep, spec);
      detail::write_output(sep.common.out, sep.common.format, trace, spec, sep.algo, out);
      err << to_string(trace.outcome.kind) << " after " << trace.iterations() << " iterations\n";
      return exit_code(trace.outcome.kind);
    }
    if (minimize->parsed()) {
      const InstanceSpec spec = detail::load_instance(min.common.instance);
      const RunTrace trace = detail::run_minimizer(min, spec);
      detail::write_output(min.common.out, min.common.format, trace, spec, min.method, out);
      err << to_string(trace.outcome.kind) << " after " << trace.iterations() << " iterations\n";
      return exit_code(trace.outcome.kind);
    }
    ExperimentOptions opt;
    opt.runs = exp.runs;
    if (opt.runs && *opt.runs == 0) throw UsageError("--runs must be positive");
    opt.seed = exp.seed;
    opt.max_iterations = exp.max_iter;
    opt.h0 = parse_unit_ball_start(exp.h0);
    opt.out_dir = exp.out_dir;
    opt.threads = exp.threads;
    const ExperimentResult result = run_experiment(exp.figure, opt);
    out << "metric,value\n";
    for (const auto& [key, value] : result.aggregates) out << key << ',' << format_number(value) << '\n';
    for (const auto& path : result.files) err << "wrote " << path.string() << '\n';
    return kOk;
  } catch (const UsageError& e) {
    return usage(e.what());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace rescale::cli

#endif  // RESCALE_CLI_HPP
