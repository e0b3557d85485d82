#ifndef RESCALE_TRACE_HPP
#define RESCALE_TRACE_HPP

#include "rescale/types.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rescale {

enum class OutcomeKind {
  Separated,
  MembershipCertified,
  StepVanished,
  DescentFound,
  Converged,
  MaxIterations,
  CurvatureFailure,
};

inline const char* to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Separated: return "Separated";
    case OutcomeKind::MembershipCertified: return "MembershipCertified";
    case OutcomeKind::StepVanished: return "StepVanished";
    case OutcomeKind::DescentFound: return "DescentFound";
    case OutcomeKind::Converged: return "Converged";
    case OutcomeKind::MaxIterations: return "MaxIterations";
    case OutcomeKind::CurvatureFailure: return "CurvatureFailure";
  }
  return "Unknown";
}

struct Outcome {
  OutcomeKind kind = OutcomeKind::MaxIterations;
  // Separated: a normal z with max over the set of <q, z> < 0.
  // DescentFound: the descent step.
  Vector normal;
  // max over the original set of <q, normal>; negative for a valid certificate
  double certificate_margin = kNaN;
  std::string detail;

  bool separated() const noexcept { return kind == OutcomeKind::Separated; }
};

/**
 * One loop pass. Fields that do not apply to an algorithm are NaN.
 *
 * step_norm  ||h|| (Shor family, Cholesky), ||s|| (BFGS family), ||x|| (ellipsoid)
 * statistic  the quantity whose sign triggers termination: p^T h for the
 *            Shor and Cholesky families (stop when > 0), g_+^T s for the
 *            BFGS family and g^T x for the ellipsoid method (stop when < 0)
 * cosine     angle cosine between the two vectors in the statistic,
 *            measured in the current metric
 * log_det    natural log of det H (or of det T^T T for factored forms)
 */
struct TraceRow {
  std::int64_t k = 0;
  double step_norm = kNaN;
  double statistic = kNaN;
  double cosine = kNaN;
  double log_det = kNaN;
  double lambda_max = kNaN;
  double lambda_min = kNaN;
  double gamma = kNaN;
  double objective = kNaN;
  double gap = kNaN;
  int accepted = -1;  // minimizers only: 1 moved, 0 rejected
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::vector<Vector> path;  // optional iterate path (h, g or x per row)
  Outcome outcome;
  double wall_seconds = 0.0;

  std::size_t iterations() const noexcept { return rows.size(); }
};

struct SeparatorConfig {
  std::int64_t max_iterations = 10000;
  double step_tol = 1e-12;
  // additionally stop when ||s|| <= relative_step_tol * ||s_0|| (0 disables)
  double relative_step_tol = 0.0;
  double dilation_beta = 2.0;
  std::uint64_t seed = 0;
  std::size_t start_index = 0;
  std::optional<Vector> start_vector;
  bool record_metric = true;  // log det and eigenvalue extremes per row
  bool record_path = false;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
    if (!(step_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "step_tol must be positive");
    if (!(relative_step_tol >= 0.0))
      throw Error(ErrorKind::InvalidArgument, "relative_step_tol must be nonnegative");
    if (!(dilation_beta > 1.0)) throw Error(ErrorKind::InvalidDilation, "dilation beta must exceed 1");
  }
};

struct MinimizerConfig {
  std::int64_t max_iterations = 2000;
  double step_tol = 1e-12;
  double gap_tol = 1e-6;  // stop with Converged once f - f* <= gap_tol (when f* is known)
  std::optional<double> f_star;
  bool record_metric = true;
  bool record_path = false;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
    if (!(step_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "step_tol must be positive");
    if (!(gap_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "gap_tol must be positive");
  }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

}  // namespace rescale

#endif  // RESCALE_TRACE_HPP
