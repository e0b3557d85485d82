#ifndef RESCALE_EXPERIMENTS_HPP
#define RESCALE_EXPERIMENTS_HPP

#include "rescale/analytics.hpp"
#include "rescale/csv.hpp"
#include "rescale/instances.hpp"
#include "rescale/minimizers.hpp"
#include "rescale/reference_optimum.hpp"
#include "rescale/separators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

/*
 * Figure experiments. Every run gets its own seed derive_seed(base, r);
 * runs execute on worker threads into preallocated slots and all files are
 * written afterwards by one thread, so output is independent of scheduling.
 * Each figure writes figN.csv (plotted data) and figN_summary.csv (one row
 * per run).
 */

namespace rescale {

/// Calls body(i) for i in [0, count) on up to `threads` workers (0 = hardware).
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

struct RunSummary {
  std::string instance;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string outcome;
  std::int64_t iterations = 0;
  double final_statistic = kNaN;
  std::string detail;
};

struct ExperimentOptions {
  std::optional<std::size_t> runs;            // figure default when unset
  std::uint64_t seed = 0;                     // base seed
  std::optional<std::int64_t> max_iterations;  // figure default when unset
  UnitBallStart h0 = UnitBallStart::Wishart;   // fig7 and fig8
  std::filesystem::path out_dir;              // empty: default_out_dir()
  unsigned threads = 0;
};

struct ExperimentResult {
  std::string figure;
  std::vector<RunSummary> runs;
  std::vector<std::pair<std::string, double>> aggregates;
  std::vector<std::filesystem::path> files;

  double aggregate(const std::string& name) const {
    for (const auto& [key, value] : aggregates)
      if (key == name) return value;
    throw Error(ErrorKind::InvalidArgument, "no aggregate named '" + name + "'");
  }
};

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"};
  return ids;
}

/// $RESCALE_OUT_DIR, or the working directory.
inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("RESCALE_OUT_DIR"); env && *env) return env;
  return ".";
}

inline bool successful(const std::string& outcome) {
  return outcome == to_string(OutcomeKind::Separated) || outcome == to_string(OutcomeKind::MembershipCertified) ||
         outcome == to_string(OutcomeKind::StepVanished) || outcome == to_string(OutcomeKind::DescentFound) ||
         outcome == to_string(OutcomeKind::Converged);
}

namespace detail {

inline std::string label(const std::string& family, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out = family;
  char sep = ':';
  for (const auto& [k, v] : kv) {
    out += sep + k + "=" + v;
    sep = ';';
  }
  return out;
}

inline std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline RunSummary summarize(std::string instance, std::string algorithm, std::uint64_t seed, const RunTrace& t,
                            double final_statistic) {
  return {std::move(instance), std::move(algorithm), seed, to_string(t.outcome.kind),
          static_cast<std::int64_t>(t.iterations()), final_statistic, t.outcome.detail};
}

inline double last_statistic(const RunTrace& t) { return t.rows.empty() ? kNaN : t.rows.back().statistic; }

// Runs body; an exception becomes an Error row so no run is ever dropped.
template <typename Body>
RunSummary guarded(const std::string& instance, const std::string& algorithm, std::uint64_t seed, Body&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return {instance, algorithm, seed, "Error", 0, kNaN, e.what()};
  }
}

inline void add_run_aggregates(ExperimentResult& result) {
  std::vector<double> its;
  double failures = 0;
  for (const auto& r : result.runs) {
    if (successful(r.outcome)) its.push_back(static_cast<double>(r.iterations));
    else failures += 1;
  }
  result.aggregates.insert(result.aggregates.begin(),
                           {{"runs", static_cast<double>(result.runs.size())},
                            {"failures", failures},
                            {"mean_iterations", mean(its)},
                            {"median_iterations", median(its)}});
}

class FileSet {
 public:
  explicit FileSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(ExperimentResult& result, const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir_);
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorKind::InvalidArgument, "failed writing " + path.string());
    result.files.push_back(path);
  }

  void write_summary(ExperimentResult& result) {
    std::ostringstream os;
    CsvWriter csv(os, {"instance", "algorithm", "seed", "outcome", "iterations", "final_statistic"});
    for (const auto& r : result.runs) csv.row(r.instance, r.algorithm, r.seed, r.outcome, r.iterations, r.final_statistic);
    write(result, result.figure + "_summary.csv", os.str());
  }

 private:
  std::filesystem::path dir_;
};

struct Histogram {
  std::map<std::int64_t, std::int64_t> counts;
  void add(std::int64_t v) { ++counts[v]; }
};

// ---------------------------------------------------------------------------

inline ExperimentResult fig1(const ExperimentOptions& opt, FileSet& files) {
  const std::size_t runs = opt.runs.value_or(20);
  ExperimentResult result{"fig1", std::vector<RunSummary>(runs), {}, {}};
  std::vector<MinimizerRun> traces(runs);
  std::vector<LinearFit> fits(runs);
  parallel_for(runs, opt.threads, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(opt.seed, r);
    const std::string inst = label("maxquad", {{"n", "5"}, {"m", "4"}, {"seed", std::to_string(seed)}});
    result.runs[r] = guarded(inst, "lf-bfgs", seed, [&] {
      MaxQuadSubdiff f = gen_max_quadratics(5, 4, seed);
      const ReferenceOptimum ref = reference_optimum(f);
      Rng rng(~seed);  // start point stream, disjoint from the instance stream
      const Vector x0 = random_normal_vector(5, rng);
      MinimizerConfig cfg;
      cfg.max_iterations = opt.max_iterations.value_or(2000);
      cfg.f_star = ref.f_star;
      cfg.record_metric = false;
      traces[r] = linesearch_free_bfgs(MaxQuadObjective(std::move(f)), x0, SpdMatrix::identity(5), cfg);
      fits[r] = gap_rate_fit(traces[r].trace);
      const auto& rows = traces[r].trace.rows;
      return summarize(inst, "lf-bfgs", seed, traces[r].trace, rows.empty() ? kNaN : rows.back().gap);
    });
  });

  std::ostringstream os;
  CsvWriter csv(os, {"run", "k", "objective", "gap", "step_norm", "accepted"});
  double flat = 0;
  double good_fit = 0;
  std::vector<double> r2;
  for (std::size_t r = 0; r < runs; ++r) {
    for (const auto& row : traces[r].trace.rows) csv.row(r, row.k, row.objective, row.gap, row.step_norm, row.accepted);
    if (result.runs[r].outcome != to_string(OutcomeKind::Converged)) continue;
    if (flat_segments(traces[r].trace) >= 1) flat += 1;
    if (fits[r].slope < 0.0 && fits[r].r2 >= 0.8) good_fit += 1;
    r2.push_back(fits[r].r2);
  }
  double converged = 0;
  for (const auto& s : result.runs) converged += s.outcome == to_string(OutcomeKind::Converged);
  result.aggregates = {{"converged", converged},
                       {"converged_with_flat_segment", flat},
                       {"converged_with_rate_fit", good_fit},
                       {"median_fit_r2", median(r2)}};
  files.write(result, "fig1.csv", os.str());
  return result;
}

inline const std::vector<double>& fig2_eps_grid() {
  static const std::vector<double> grid = {1e-1, std::pow(10.0, -1.5), 1e-2, std::pow(10.0, -2.5), 1e-3};
  return grid;
}

inline ExperimentResult fig2(const ExperimentOptions& opt, FileSet& files) {
  const std::size_t per_cell = opt.runs.value_or(6);
  const std::vector<std::string> algos = {"shor", "shor-rand", "bfgs", "ellipsoid"};
  const auto& grid = fig2_eps_grid();
  const std::size_t total = grid.size() * algos.size() * per_cell;
  ExperimentResult result{"fig2", std::vector<RunSummary>(total), {}, {}};
  parallel_for(total, opt.threads, [&](std::size_t i) {
    const std::size_t e = i / (algos.size() * per_cell);
    const std::size_t a = (i / per_cell) % algos.size();
    const std::size_t r = i % per_cell;
    const std::uint64_t seed = derive_seed(opt.seed, r);
    const std::string inst = label("simplex", {{"eps", short_number(grid[e])}, {"start", std::to_string(r % 6)}});
    result.runs[i] = guarded(inst, algos[a], seed, [&] {
      const FiniteSetOracle q = gen_simplex(grid[e]);
      SeparatorConfig cfg;
      cfg.max_iterations = opt.max_iterations.value_or(100000);
      cfg.record_metric = false;
      cfg.start_index = r % q.size();
      cfg.seed = seed;
      RunTrace t;
      if (algos[a] == "shor") t = shor_separate(q, cfg);
      else if (algos[a] == "shor-rand") t = randomized_shor_separate(q, cfg);
      else if (algos[a] == "bfgs") t = bfgs_separate_hull(q, cfg);
      else t = ellipsoid_separate(q, cfg);
      return summarize(inst, algos[a], seed, t, t.outcome.certificate_margin);
    });
  });

  std::ostringstream os;
  CsvWriter csv(os, {"eps", "algorithm", "runs", "failures", "mean_iterations", "median_iterations", "max_iterations"});
  for (std::size_t e = 0; e < grid.size(); ++e)
    for (std::size_t a = 0; a < algos.size(); ++a) {
      std::vector<double> its;
      std::int64_t failures = 0;
      for (std::size_t r = 0; r < per_cell; ++r) {
        const auto& s = result.runs[(e * algos.size() + a) * per_cell + r];
        if (successful(s.outcome)) its.push_back(static_cast<double>(s.iterations));
        else ++failures;
      }
      const double mx = its.empty() ? kNaN : *std::max_element(its.begin(), its.end());
      csv.row(grid[e], algos[a], per_cell, failures, mean(its), median(its), mx);
      if (e + 1 == grid.size()) result.aggregates.push_back({"mean_iterations_eps_1e-3_" + algos[a], mean(its)});
    }
  files.write(result, "fig2.csv", os.str());
  return result;
}

inline ExperimentResult fig3(const ExperimentOptions& opt, FileSet& files) {
  const std::size_t starts = opt.runs.value_or(1);
  const std::vector<double> eps = {1e-1, 1e-3};
  const std::vector<std::string> algos = {"shor", "bfgs-chol"};
  const std::size_t total = eps.size() * algos.size() * starts;
  ExperimentResult result{"fig3", std::vector<RunSummary>(total), {}, {}};
  std::vector<RunTrace> traces(total);
  parallel_for(total, opt.threads, [&](std::size_t i) {
    const std::size_t e = i / (algos.size() * starts);
    const std::size_t a = (i / starts) % algos.size();
    const std::size_t r = i % starts;
    const std::string inst = label("simplex", {{"eps", short_number(eps[e])}, {"start", std::to_string(r % 6)}});
    result.runs[i] = guarded(inst, algos[a], opt.seed, [&] {
      const FiniteSetOracle q = gen_simplex(eps[e]);
      SeparatorConfig cfg;
      cfg.max_iterations = opt.max_iterations.value_or(100000);
      cfg.record_metric = false;
      cfg.record_path = true;
      cfg.start_index = r % q.size();
      traces[i] = algos[a] == "shor" ? shor_separate(q, cfg) : cholesky_bfgs_separate(q.points(), cfg);
      return summarize(inst, algos[a], opt.seed, traces[i], last_statistic(traces[i]));
    });
  });
  std::ostringstream os;
  CsvWriter csv(os, {"eps", "algorithm", "start", "k", "h1", "h2"});
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t e = i / (algos.size() * starts);
    const std::size_t a = (i / starts) % algos.size();
    for (std::size_t k = 0; k < traces[i].path.size(); ++k)
      csv.row(eps[e], algos[a], i % starts % 6, k, traces[i].path[k](0), traces[i].path[k](1));
  }
  files.write(result, "fig3.csv", os.str());
  return result;
}

// Shared by the Shor (fig4) and BFGS (fig6) ellipsoid histograms.
inline ExperimentResult ellipsoid_histograms(const std::string& figure, bool use_bfgs, const ExperimentOptions& opt,
                                             FileSet& files) {
  const std::size_t runs = opt.runs.value_or(100);
  const std::vector<double> ds = {1.0, 0.1};
  const std::vector<int> exponents = {0, 1, 2, 3, 4};
  const std::string algo = use_bfgs ? "bfgs" : "shor";
  ExperimentResult result{figure, std::vector<RunSummary>(ds.size() * runs), {}, {}};
  parallel_for(ds.size() * runs, opt.threads, [&](std::size_t i) {
    const double d = ds[i / runs];
    const std::uint64_t seed = derive_seed(opt.seed, i % runs);
    const std::string inst = label("ellipsoid", {{"d", short_number(d)}, {"seed", std::to_string(seed)}});
    result.runs[i] = guarded(inst, algo, seed, [&] {
      const EllipsoidInstance e = gen_ellipsoid(exponents, d, seed);
      SeparatorConfig cfg;
      cfg.max_iterations = opt.max_iterations.value_or(10000);
      cfg.record_metric = false;
      const RunTrace t = use_bfgs ? bfgs_separate(EllipsoidOracle(e.A, e.c), Vector(e.A * e.start - e.c), cfg)
                                  : shor_separate_ellipsoid(e.A, e.c, e.start, cfg);
      return summarize(inst, algo, seed, t, t.outcome.certificate_margin);
    });
  });
  std::ostringstream os;
  CsvWriter csv(os, {"d", "iterations", "count"});
  for (std::size_t j = 0; j < ds.size(); ++j) {
    Histogram h;
    std::int64_t ok = 0;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& s = result.runs[j * runs + r];
      if (!successful(s.outcome)) continue;
      h.add(s.iterations);
      ++ok;
    }
    for (const auto& [its, count] : h.counts) csv.row(ds[j], its, count);
    result.aggregates.push_back({"separated_d_" + short_number(ds[j]), static_cast<double>(ok)});
  }
  files.write(result, figure + ".csv", os.str());
  return result;
}

inline ExperimentResult fig5(const ExperimentOptions& opt, FileSet& files, std::size_t burn_in = 20) {
  ExperimentResult result{"fig5", std::vector<RunSummary>(1), {}, {}};
  const EllipsoidInstance e = failure_instance();
  SeparatorConfig cfg;
  cfg.max_iterations = opt.max_iterations.value_or(1000);
  cfg.record_metric = false;
  const RunTrace t = shor_separate_ellipsoid(e.A, e.c, e.start, cfg);
  result.runs[0] = summarize("failure-r2", "shor", 0, t, last_statistic(t));
  std::vector<double> cosines;
  for (std::size_t k = burn_in; k < t.rows.size(); ++k) cosines.push_back(t.rows[k].cosine);
  const CycleReport cycle = detect_cycle(cosines);
  result.aggregates = {{"max_cosine_after_burn_in", cosines.empty() ? kNaN : *std::max_element(cosines.begin(), cosines.end())},
                       {"lag5_autocorrelation", autocorrelation(cosines, 5)},
                       {"period", static_cast<double>(cycle.period)},
                       {"period_drift", cycle.drift}};
  std::ostringstream os;
  CsvWriter csv(os, {"k", "cosine"});
  for (std::size_t k = 0; k < std::min<std::size_t>(100, t.rows.size()); ++k) csv.row(t.rows[k].k, t.rows[k].cosine);
  files.write(result, "fig5.csv", os.str());
  return result;
}

// One unit-ball run stopped once ||s|| has shrunk by the factor 1e-8.
inline constexpr double kUnitBallReduction = 1e-8;

inline RunTrace unit_ball_run(Index n, std::uint64_t seed, UnitBallStart h0, std::int64_t max_iterations) {
  const UnitBallInstance u = gen_unit_ball(n, seed, h0);
  SeparatorConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.step_tol = std::numeric_limits<double>::min();
  cfg.relative_step_tol = kUnitBallReduction;
  cfg.record_metric = false;
  return unit_ball_iteration(u.g0, u.H0, cfg);
}

inline ExperimentResult fig7(const ExperimentOptions& opt, FileSet& files) {
  const std::size_t runs = opt.runs.value_or(1000);
  ExperimentResult result{"fig7", std::vector<RunSummary>(runs), {}, {}};
  std::vector<RunTrace> traces(runs);
  parallel_for(runs, opt.threads, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(opt.seed, r);
    const std::string inst = label("unitball", {{"n", "5"}, {"h0", to_string(opt.h0)}, {"seed", std::to_string(seed)}});
    result.runs[r] = guarded(inst, "bfgs", seed, [&] {
      traces[r] = unit_ball_run(5, seed, opt.h0, opt.max_iterations.value_or(500));
      return summarize(inst, "bfgs", seed, traces[r], traces[r].rows.empty() ? kNaN : traces[r].rows.back().step_norm);
    });
  });
  std::ostringstream os;
  CsvWriter csv(os, {"run", "k", "step_norm"});
  double reached = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    for (const auto& row : traces[r].rows) csv.row(r, row.k, row.step_norm);
    reached += first_step_reduced(traces[r], kUnitBallReduction).has_value();
  }
  result.aggregates = {{"reached_reduction", reached}};
  files.write(result, "fig7.csv", os.str());
  return result;
}

inline const std::vector<Index>& fig8_dimensions() {
  static const std::vector<Index> dims = {2, 4, 8, 16, 32, 64};
  return dims;
}

inline ExperimentResult fig8(const ExperimentOptions& opt, FileSet& files) {
  const std::size_t runs = opt.runs.value_or(200);
  const auto& dims = fig8_dimensions();
  ExperimentResult result{"fig8", std::vector<RunSummary>(dims.size() * runs), {}, {}};
  parallel_for(dims.size() * runs, opt.threads, [&](std::size_t i) {
    const Index n = dims[i / runs];
    const std::uint64_t seed = derive_seed(opt.seed, i % runs);
    const std::string inst =
        label("unitball", {{"n", std::to_string(n)}, {"h0", to_string(opt.h0)}, {"seed", std::to_string(seed)}});
    result.runs[i] = guarded(inst, "bfgs", seed, [&] {
      const RunTrace t = unit_ball_run(n, seed, opt.h0, opt.max_iterations.value_or(5000));
      RunSummary s = summarize(inst, "bfgs", seed, t, t.rows.empty() ? kNaN : t.rows.back().step_norm);
      // iterations to the reduction: index of the first row that reaches it
      if (auto k = first_step_reduced(t, kUnitBallReduction)) s.iterations = static_cast<std::int64_t>(*k);
      return s;
    });
  });
  std::ostringstream os;
  CsvWriter csv(os, {"kind", "n", "runs", "failures", "mean_iterations", "median_iterations", "max_iterations",
                     "slope", "intercept", "r2"});
  std::vector<double> ns;
  std::vector<double> means;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    std::vector<double> its;
    std::int64_t failures = 0;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto& s = result.runs[j * runs + r];
      if (successful(s.outcome)) its.push_back(static_cast<double>(s.iterations));
      else ++failures;
    }
    const double mx = its.empty() ? kNaN : *std::max_element(its.begin(), its.end());
    csv.row("dimension", dims[j], runs, failures, mean(its), median(its), mx, kNaN, kNaN, kNaN);
    ns.push_back(static_cast<double>(dims[j]));
    means.push_back(mean(its));
  }
  const LinearFit fit = loglog_fit(ns, means);
  const double reference = 1.0 / std::sqrt(2.0);
  csv.row("fit", kNaN, runs * dims.size(), 0, kNaN, kNaN, kNaN, fit.slope, fit.intercept, fit.r2);
  csv.row("reference", kNaN, 0, 0, kNaN, kNaN, kNaN, reference, kNaN, kNaN);
  result.aggregates = {{"fitted_slope", fit.slope}, {"fit_r2", fit.r2}, {"reference_slope", reference}};
  files.write(result, "fig8.csv", os.str());
  return result;
}

}  // namespace detail

/// Runs one figure experiment and writes its CSV files into the output directory.
inline ExperimentResult run_experiment(const std::string& figure, const ExperimentOptions& opt = {}) {
  if (opt.runs && *opt.runs == 0) throw Error(ErrorKind::InvalidArgument, "runs must be positive");
  detail::FileSet files(opt.out_dir.empty() ? default_out_dir() : opt.out_dir);
  ExperimentResult result;
  if (figure == "fig1") result = detail::fig1(opt, files);
  else if (figure == "fig2") result = detail::fig2(opt, files);
  else if (figure == "fig3") result = detail::fig3(opt, files);
  else if (figure == "fig4") result = detail::ellipsoid_histograms("fig4", false, opt, files);
  else if (figure == "fig5") result = detail::fig5(opt, files);
  else if (figure == "fig6") result = detail::ellipsoid_histograms("fig6", true, opt, files);
  else if (figure == "fig7") result = detail::fig7(opt, files);
  else if (figure == "fig8") result = detail::fig8(opt, files);
  else throw Error(ErrorKind::InvalidArgument, "unknown figure '" + figure + "'");
  detail::add_run_aggregates(result);
  files.write_summary(result);
  return result;
}

}  // namespace rescale

#endif  // RESCALE_EXPERIMENTS_HPP
