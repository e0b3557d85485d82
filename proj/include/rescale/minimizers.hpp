#ifndef RESCALE_MINIMIZERS_HPP
#define RESCALE_MINIMIZERS_HPP

#include "rescale/oracles.hpp"
#include "rescale/trace.hpp"
#include "rescale/types.hpp"
#include "rescale/updates.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

/*
 * Minimization with unit steps and no line search.
 *
 * All loops apply the nonsmooth unit-step BFGS update: s = -H g, the new
 * subgradient maximizes <., s> over the subdifferential at x + s, and the
 * subgradient at a point that is kept is refreshed the same way along s.
 */

namespace rescale {

class ObjectiveOracle {
 public:
  virtual ~ObjectiveOracle() = default;
  virtual double value(const Vector& x) const = 0;
  /// A subgradient at x maximizing <., direction>; smooth objectives ignore direction.
  virtual Vector subgradient(const Vector& x, const Vector& direction) const = 0;
  virtual Index dimension() const = 0;
};

class MaxQuadObjective final : public ObjectiveOracle {
 public:
  explicit MaxQuadObjective(MaxQuadSubdiff f) : f_(std::move(f)) {}
  double value(const Vector& x) const override { return f_.value(x); }
  Vector subgradient(const Vector& x, const Vector& direction) const override {
    return f_.subdiff_argmax(x, direction);
  }
  Index dimension() const override { return f_.dimension(); }
  const MaxQuadSubdiff& pieces() const noexcept { return f_; }

 private:
  MaxQuadSubdiff f_;
};

/// 1/2 ||R x||^2 for an invertible R.
class QuadraticObjective final : public ObjectiveOracle {
 public:
  explicit QuadraticObjective(Matrix R) : R_(std::move(R)), P_(R_.transpose() * R_) {}
  double value(const Vector& x) const override { return 0.5 * (R_ * x).squaredNorm(); }
  Vector subgradient(const Vector& x, const Vector&) const override { return P_ * x; }
  Index dimension() const override { return R_.cols(); }
  const Matrix& factor() const noexcept { return R_; }

 private:
  Matrix R_;
  Matrix P_;
};

/// The Euclidean norm; at 0 its subdifferential is the unit ball.
class NormObjective final : public ObjectiveOracle {
 public:
  explicit NormObjective(Index n) : n_(n) {}
  double value(const Vector& x) const override { return x.norm(); }
  Vector subgradient(const Vector& x, const Vector& direction) const override {
    const double xn = x.norm();
    if (xn > 0.0) return x / xn;
    const double dn = direction.norm();
    return dn > 0.0 ? Vector(direction / dn) : Vector(Vector::Zero(n_));
  }
  Index dimension() const override { return n_; }

 private:
  Index n_;
};

/// max_i <d_i, x>, the support function of conv D.
class SupportFunctionObjective final : public ObjectiveOracle {
 public:
  explicit SupportFunctionObjective(FiniteSetOracle points, double activity_tol = 1e-12)
      : points_(std::move(points)), activity_tol_(activity_tol) {}

  double value(const Vector& x) const override { return points_.argmax_linear(x).value; }

  Vector subgradient(const Vector& x, const Vector& direction) const override {
    const double top = value(x);
    const double cut = top - activity_tol_ * (1.0 + std::abs(top));
    std::size_t best = points_.size();
    double best_value = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!(points_[i].dot(x) >= cut)) continue;
      const double v = points_[i].dot(direction);
      if (best == points_.size() || v > best_value) {
        best = i;
        best_value = v;
      }
    }
    return points_[best];
  }

  Index dimension() const override { return points_.dimension(); }
  const FiniteSetOracle& points() const noexcept { return points_; }

 private:
  FiniteSetOracle points_;
  double activity_tol_;
};

/// A smooth objective given by callables.
class SmoothObjective final : public ObjectiveOracle {
 public:
  SmoothObjective(Index n, std::function<double(const Vector&)> value,
                  std::function<Vector(const Vector&)> gradient)
      : n_(n), value_(std::move(value)), gradient_(std::move(gradient)) {}
  double value(const Vector& x) const override { return value_(x); }
  Vector subgradient(const Vector& x, const Vector&) const override { return gradient_(x); }
  Index dimension() const override { return n_; }

 private:
  Index n_;
  std::function<double(const Vector&)> value_;
  std::function<Vector(const Vector&)> gradient_;
};

struct MinimizerRun {
  RunTrace trace;
  Vector x;  // final iterate
  Matrix H;  // final metric

  SpdMatrix metric() const { return SpdMatrix(H); }
};

namespace detail {

inline void record_min_metric(TraceRow& row, const Matrix& H) {
  Eigen::LLT<Matrix> llt(H);
  row.log_det = llt.info() == Eigen::Success ? 2.0 * llt.matrixLLT().diagonal().array().log().sum() : kNaN;
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  row.lambda_min = es.eigenvalues().minCoeff();
  row.lambda_max = es.eigenvalues().maxCoeff();
}

inline Outcome min_outcome(OutcomeKind kind, std::string text, Vector step = {}) {
  return {kind, std::move(step), kNaN, std::move(text)};
}

}  // namespace detail

/**
 * Linesearch-free BFGS: take the unit step s = -H g, always update H, and
 * move to x + s only on strict decrease. Row k holds f(x_k) before pass k
 * and whether that pass moved. Stops with Converged once f - f* <= gap_tol
 * (f* from the config), StepVanished once ||s|| <= step_tol.
 */
inline MinimizerRun linesearch_free_bfgs(const ObjectiveOracle& f, const Vector& x0, const SpdMatrix& H0,
                                         const MinimizerConfig& cfg = {}) {
  cfg.validate();
  const Index n = f.dimension();
  if (x0.size() != n || H0.dim() != n) throw Error(ErrorKind::InvalidArgument, "dimension mismatch");
  detail::Stopwatch clock;
  MinimizerRun run;
  RunTrace& trace = run.trace;
  Vector x = x0;
  double fx = f.value(x);
  Vector g = f.subgradient(x, Vector::Zero(n));
  Matrix H = H0.matrix();

  for (std::int64_t k = 0;; ++k) {
    TraceRow row;
    row.k = k;
    row.objective = fx;
    if (cfg.f_star) row.gap = fx - *cfg.f_star;
    if (cfg.record_metric) detail::record_min_metric(row, H);
    if (cfg.record_path) trace.path.push_back(x);
    if (cfg.f_star && row.gap <= cfg.gap_tol) {
      trace.rows.push_back(row);
      trace.outcome = detail::min_outcome(OutcomeKind::Converged, "gap below tolerance");
      break;
    }
    if (k >= cfg.max_iterations) {
      trace.outcome = detail::min_outcome(OutcomeKind::MaxIterations, "iteration cap reached");
      break;
    }
    const Vector s = -(H * g);
    row.step_norm = s.norm();
    if (!(row.step_norm > cfg.step_tol)) {
      trace.rows.push_back(row);
      trace.outcome = detail::min_outcome(OutcomeKind::StepVanished, "||s|| below tolerance");
      break;
    }
    const Vector x_plus = x + s;
    const double f_plus = f.value(x_plus);
    const Vector g_plus = f.subgradient(x_plus, s);
    row.statistic = g_plus.dot(s);
    const Vector y = g_plus - g;
    if (!curvature_acceptable(s, y)) {
      trace.rows.push_back(row);
      trace.outcome = detail::min_outcome(OutcomeKind::CurvatureFailure, "s^T y is not positive");
      break;
    }
    detail::bfgs_update_in_place(H, s, y);
    if (f_plus < fx) {
      x = x_plus;
      fx = f_plus;
      row.accepted = 1;
    } else {
      row.accepted = 0;
    }
    g = f.subgradient(x, s);
    trace.rows.push_back(row);
  }
  run.x = std::move(x);
  run.H = std::move(H);
  trace.wall_seconds = clock.seconds();
  return run;
}

/**
 * Repeats the unit-step BFGS update at a fixed x until the trial step
 * descends: f(x - H g) < f(x). For smooth f; the outcome normal is the
 * descent step.
 */
inline MinimizerRun fixed_point_bfgs_descent(const ObjectiveOracle& f, const Vector& x, const SpdMatrix& H0,
                                             const MinimizerConfig& cfg = {}) {
  cfg.validate();
  const Index n = f.dimension();
  if (x.size() != n || H0.dim() != n) throw Error(ErrorKind::InvalidArgument, "dimension mismatch");
  const Vector g = f.subgradient(x, Vector::Zero(n));
  if (!(g.norm() > 0.0)) throw Error(ErrorKind::DegenerateGradient, "x is a critical point");
  detail::Stopwatch clock;
  MinimizerRun run;
  RunTrace& trace = run.trace;
  const double fx = f.value(x);
  Matrix H = H0.matrix();
  trace.outcome = detail::min_outcome(OutcomeKind::MaxIterations, "iteration cap reached");

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const Vector s = -(H * g);
    const double f_plus = f.value(x + s);
    TraceRow row;
    row.k = k;
    row.step_norm = s.norm();
    row.objective = f_plus;
    row.statistic = f_plus - fx;
    if (cfg.record_metric) detail::record_min_metric(row, H);
    trace.rows.push_back(row);
    if (f_plus < fx) {
      trace.outcome = detail::min_outcome(OutcomeKind::DescentFound, "f(x - H g) < f(x)", s);
      break;
    }
    const Vector y = f.subgradient(x + s, s) - g;
    if (!curvature_acceptable(s, y)) {
      trace.outcome = detail::min_outcome(OutcomeKind::CurvatureFailure, "s^T y is not positive");
      break;
    }
    detail::bfgs_update_in_place(H, s, y);
  }
  run.x = x;
  run.H = std::move(H);
  trace.wall_seconds = clock.seconds();
  return run;
}

/**
 * The nonsmooth fixed-point loop: while f(x - H g) >= f(x), update H with
 * g_+ maximizing <., s> over the subdifferential at x + s, then refresh g
 * to the subgradient at x maximizing <., s>. Stops with DescentFound,
 * StepVanished (||H g|| <= step_tol), CurvatureFailure or MaxIterations.
 */
inline MinimizerRun fixed_point_bfgs_nonsmooth(const ObjectiveOracle& f, const Vector& x, const Vector& g0,
                                               const SpdMatrix& H0, const MinimizerConfig& cfg = {}) {
  cfg.validate();
  const Index n = f.dimension();
  if (x.size() != n || g0.size() != n || H0.dim() != n)
    throw Error(ErrorKind::InvalidArgument, "dimension mismatch");
  detail::Stopwatch clock;
  MinimizerRun run;
  RunTrace& trace = run.trace;
  const double fx = f.value(x);
  Vector g = g0;
  Matrix H = H0.matrix();
  trace.outcome = detail::min_outcome(OutcomeKind::MaxIterations, "iteration cap reached");

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const Vector s = -(H * g);
    TraceRow row;
    row.k = k;
    row.step_norm = s.norm();
    if (cfg.record_metric) detail::record_min_metric(row, H);
    if (cfg.record_path) trace.path.push_back(g);
    if (!(row.step_norm > cfg.step_tol)) {
      trace.rows.push_back(row);
      trace.outcome = detail::min_outcome(OutcomeKind::StepVanished, "||s|| below tolerance");
      break;
    }
    const double f_plus = f.value(x + s);
    row.objective = f_plus;
    row.statistic = f_plus - fx;
    trace.rows.push_back(row);
    if (f_plus < fx) {
      trace.outcome = detail::min_outcome(OutcomeKind::DescentFound, "f(x - H g) < f(x)", s);
      break;
    }
    const Vector y = f.subgradient(x + s, s) - g;
    if (!curvature_acceptable(s, y)) {
      trace.outcome = detail::min_outcome(OutcomeKind::CurvatureFailure, "s^T y is not positive");
      break;
    }
    detail::bfgs_update_in_place(H, s, y);
    g = f.subgradient(x, s);
  }
  run.x = x;
  run.H = std::move(H);
  trace.wall_seconds = clock.seconds();
  return run;
}

}  // namespace rescale

#endif  // RESCALE_MINIMIZERS_HPP
