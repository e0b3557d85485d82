#ifndef RESCALE_SEPARATORS_HPP
#define RESCALE_SEPARATORS_HPP

#include "rescale/oracles.hpp"
#include "rescale/trace.hpp"
#include "rescale/types.hpp"
#include "rescale/updates.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

/*
 * Separation and membership loops. Each returns a RunTrace with one row per
 * loop pass. A Separated outcome carries a unit normal z oriented so that
 * <q, z> < 0 on the whole set, together with the margin max_q <q, z>
 * evaluated on the original data.
 *
 * Long runs shrink or grow the homogeneous state (V, h, A, c, H, points)
 * geometrically. Every such state is renormalized by an exact power of two,
 * which leaves the iterate path bit-for-bit unchanged; reported norms,
 * statistics and log-determinants include the tracked exponent.
 */

namespace rescale {

namespace detail {

inline constexpr double kLn2 = 0.69314718055994530942;

inline void renormalize(Matrix& m, int& exponent) {
  const int e = magnitude_exponent(m);
  if (e > kRescaleThreshold || e < -kRescaleThreshold) {
    m *= std::ldexp(1.0, -e);
    exponent += e;
  }
}

// Rescales m and its companion vector by the power of two that normalizes m.
inline void renormalize(Matrix& m, Vector& companion, int& exponent) {
  const int e = magnitude_exponent(m);
  if (e > kRescaleThreshold || e < -kRescaleThreshold) {
    const double f = std::ldexp(1.0, -e);
    m *= f;
    companion *= f;
    exponent += e;
  }
}

inline Spectrum scaled_spectrum(const Matrix& sym, int exponent) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return {std::ldexp(es.eigenvalues().minCoeff(), exponent),
          std::ldexp(es.eigenvalues().maxCoeff(), exponent)};
}

// log det, extremes of 2^exponent * H for a symmetric H
inline void record_metric(TraceRow& row, const Matrix& H, int exponent) {
  Eigen::LLT<Matrix> llt(H);
  row.log_det = llt.info() == Eigen::Success
                    ? 2.0 * llt.matrixLLT().diagonal().array().log().sum() +
                          static_cast<double>(H.rows()) * exponent * kLn2
                    : kNaN;
  const Spectrum sp = scaled_spectrum(H, exponent);
  row.lambda_min = sp.lambda_min;
  row.lambda_max = sp.lambda_max;
}

// Metric F^T F of a factor F = 2^exponent * factor with known log|det factor|.
inline void record_factor_metric(TraceRow& row, const Matrix& factor, int exponent,
                                 double log_abs_det) {
  row.log_det = 2.0 * (log_abs_det + static_cast<double>(factor.rows()) * exponent * kLn2);
  const Spectrum sp = scaled_spectrum(factor.transpose() * factor, 2 * exponent);
  row.lambda_min = sp.lambda_min;
  row.lambda_max = sp.lambda_max;
}

inline Outcome separated(Vector z, double margin, std::string detail_text = {}) {
  const double norm = z.norm();
  if (norm > 0.0) z /= norm;
  Outcome out{OutcomeKind::Separated, std::move(z), margin, std::move(detail_text)};
  if (!(margin < 0.0) && out.detail.empty()) out.detail = "certificate fails on the original set";
  return out;
}

inline Outcome separated_on(const SupportOracle& oracle, Vector z) {
  const double norm = z.norm();
  if (norm > 0.0) z /= norm;
  const double margin = oracle.argmax_linear(z).value;
  return separated(std::move(z), margin);
}

inline Outcome plain(OutcomeKind kind, std::string detail_text = {}) {
  return {kind, Vector(), kNaN, std::move(detail_text)};
}

inline double scaled(double value, int exponent) { return std::ldexp(value, exponent); }

// Shared body of the classic Shor loop over V Q, started from h in V Q with V = I.
inline RunTrace shor_loop(const SupportOracle& oracle, Vector h, const SeparatorConfig& cfg) {
  cfg.validate();
  Stopwatch clock;
  RunTrace trace;
  const Index n = h.size();
  Matrix V = Matrix::Identity(n, n);
  int vexp = 0;
  double log_abs_det = 0.0;
  const double log_shrink = std::log(1.0 - 1.0 / cfg.dilation_beta);

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const LinearOptimum opt = transformed_argmin(oracle, V, h);
    const Vector& p = opt.point;
    TraceRow row;
    row.k = k;
    row.step_norm = scaled(h.norm(), vexp);
    row.statistic = scaled(p.dot(h), 2 * vexp);
    row.cosine = cosine(p, h);
    if (cfg.record_metric) record_factor_metric(row, V, vexp, log_abs_det);
    trace.rows.push_back(row);
    if (cfg.record_path) trace.path.push_back(h * std::ldexp(1.0, vexp));

    if (p.dot(h) > 0.0) {
      trace.outcome = separated_on(oracle, -(V.transpose() * h));
      break;
    }
    const Vector e = h - p;
    if (!(e.norm() > kDirectionFloor * (h.norm() + p.norm()))) {
      trace.outcome = plain(OutcomeKind::StepVanished, "h and p coincide");
      break;
    }
    const RescalingTransform W = shor_dilation(e, cfg.dilation_beta, 0.0);
    h = W.matrix * p;
    V = W.matrix * V;
    log_abs_det += log_shrink;
    renormalize(V, h, vexp);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

// Unit-step BFGS loop shared by the membership, hull and unit-ball variants.
struct BfgsLoopOptions {
  bool membership_branch = true;
  bool step_vanish = true;
};

inline RunTrace bfgs_loop(const SupportOracle& oracle, Vector g, const SpdMatrix& H0,
                          const SeparatorConfig& cfg, BfgsLoopOptions opts) {
  cfg.validate();
  if (H0.dim() != g.size()) throw Error(ErrorKind::InvalidArgument, "H0 and g differ in dimension");
  Stopwatch clock;
  RunTrace trace;
  Matrix H = H0.matrix();
  int hexp = 0;
  double first_step = kNaN;

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    TraceRow row;
    row.k = k;
    if (opts.membership_branch && !(g.norm() > cfg.step_tol)) {
      row.step_norm = scaled((H * g).norm(), hexp);
      if (cfg.record_metric) record_metric(row, H, hexp);
      trace.rows.push_back(row);
      trace.outcome = plain(OutcomeKind::MembershipCertified, "g vanished");
      break;
    }
    const Vector s = -(H * g);
    const double step = scaled(s.norm(), hexp);
    if (k == 0) first_step = step;
    row.step_norm = step;
    if (cfg.record_metric) record_metric(row, H, hexp);
    if (cfg.record_path) trace.path.push_back(g);

    if (opts.step_vanish &&
        (!(step > cfg.step_tol) ||
         (cfg.relative_step_tol > 0.0 && !(step > cfg.relative_step_tol * first_step)))) {
      trace.rows.push_back(row);
      trace.outcome = plain(OutcomeKind::StepVanished, "||s|| below tolerance");
      break;
    }

    const Vector g_plus = oracle.argmax_linear(s).point;
    const double stat = g_plus.dot(s);
    row.statistic = scaled(stat, hexp);
    const double hg = -g.dot(s);
    const double hgp = g_plus.dot(H * g_plus);
    row.cosine = (hg > 0.0 && hgp > 0.0) ? -stat / std::sqrt(hg * hgp) : kNaN;
    trace.rows.push_back(row);

    if (stat < 0.0) {
      trace.outcome = separated_on(oracle, s);
      break;
    }
    const Vector y = g_plus - g;
    if (!curvature_acceptable(s, y)) {
      trace.outcome = plain(OutcomeKind::CurvatureFailure, "s^T y is not positive");
      break;
    }
    bfgs_update_in_place(H, s, y);
    g = g_plus;
    renormalize(H, hexp);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

inline Vector start_point(const FiniteSetOracle& set, const SeparatorConfig& cfg) {
  if (cfg.start_vector) return *cfg.start_vector;
  if (cfg.start_index >= set.size()) throw Error(ErrorKind::InvalidArgument, "start index out of range");
  return set[cfg.start_index];
}

// Lagrange identity form of ||c||^2 ||d||^2 - (c^T d)^2, free of cancellation.
inline double wedge_squared(const Vector& c, const Vector& d) {
  double sum = 0.0;
  for (Index i = 0; i < c.size(); ++i)
    for (Index j = i + 1; j < c.size(); ++j) {
      const double w = c(i) * d(j) - c(j) * d(i);
      sum += w * w;
    }
  return sum;
}

}  // namespace detail

/// Segment conditioning sqrt(||c||^2 ||d||^2 - (c^T d)^2) / ||c - d||^2.
inline double segment_gamma(const Vector& c, const Vector& d) {
  return std::sqrt(detail::wedge_squared(c, d)) / (c - d).squaredNorm();
}

/// Iteration bound ||c - d||^4 / (||c||^2 ||d||^2 - (c^T d)^2) for a segment missing 0.
inline double segment_iteration_bound(const Vector& c, const Vector& d) {
  const double len2 = (c - d).squaredNorm();
  return len2 * len2 / detail::wedge_squared(c, d);
}

/// Classic Shor updating for 0 in conv Q from a start point of Q.
inline RunTrace shor_separate(const SupportOracle& oracle, const Vector& start,
                              const SeparatorConfig& cfg = {}) {
  if (start.size() != oracle.dimension()) throw Error(ErrorKind::InvalidArgument, "start has wrong dimension");
  return detail::shor_loop(oracle, start, cfg);
}

inline RunTrace shor_separate(const FiniteSetOracle& set, const SeparatorConfig& cfg = {}) {
  return detail::shor_loop(set, detail::start_point(set, cfg), cfg);
}

/**
 * Shor updating that separates c from the ellipsoid A B, run on the
 * ellipsoid data directly (A, c and V are all multiplied by each dilation).
 * A Separated normal z satisfies ||A^T z|| < c^T z for the original A, c;
 * the reported margin is ||A^T z|| - c^T z.
 */
inline RunTrace shor_separate_ellipsoid(const Matrix& A0, const Vector& c0, const Vector& start_unit,
                                        const SeparatorConfig& cfg = {}) {
  cfg.validate();
  const Index n = c0.size();
  if (A0.rows() != n || A0.cols() != n || start_unit.size() != n)
    throw Error(ErrorKind::InvalidArgument, "ellipsoid data have inconsistent shapes");
  if (std::abs(start_unit.norm() - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidArgument, "start must be a unit vector");
  detail::Stopwatch clock;
  RunTrace trace;
  Matrix A = A0;
  Vector c = c0;
  Vector x = start_unit;
  Matrix V = Matrix::Identity(n, n);
  int aexp = 0;
  int vexp = 0;
  double log_abs_det = 0.0;
  const double log_shrink = std::log(1.0 - 1.0 / cfg.dilation_beta);

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const Vector h = A * x - c;
    Vector y = -(A.transpose() * h);
    const double ynorm = y.norm();
    TraceRow row;
    row.k = k;
    row.step_norm = detail::scaled(h.norm(), aexp);
    if (cfg.record_metric) detail::record_factor_metric(row, V, vexp, log_abs_det);
    if (cfg.record_path) trace.path.push_back(h * std::ldexp(1.0, aexp));
    if (!(ynorm > 0.0)) {
      trace.rows.push_back(row);
      trace.outcome = detail::plain(OutcomeKind::StepVanished, "h vanished");
      break;
    }
    y /= ynorm;
    const Vector p = A * y - c;
    const double stat = p.dot(h);
    row.statistic = detail::scaled(stat, 2 * aexp);
    row.cosine = cosine(p, h);
    trace.rows.push_back(row);

    if (stat > 0.0) {
      Vector z = -(V.transpose() * h);
      z /= z.norm();
      trace.outcome = detail::separated(z, (A0.transpose() * z).norm() - c0.dot(z));
      break;
    }
    const Vector e = h - p;
    if (!(e.norm() > kDirectionFloor * (h.norm() + p.norm()))) {
      trace.outcome = detail::plain(OutcomeKind::StepVanished, "h and p coincide");
      break;
    }
    const RescalingTransform W = shor_dilation(e, cfg.dilation_beta, 0.0);
    A = W.matrix * A;
    V = W.matrix * V;
    c = W.matrix * c;
    x = y;
    log_abs_det += log_shrink;
    detail::renormalize(A, c, aexp);
    detail::renormalize(V, vexp);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

/**
 * Randomized Shor: each pass draws u standard normal, takes h minimizing
 * <., u> and p minimizing <., h> over V Q. p^T h > 0 puts all of V Q on
 * the positive side of h, so the normal is built from V^T h.
 */
inline RunTrace randomized_shor_separate(const SupportOracle& oracle, const SeparatorConfig& cfg = {}) {
  cfg.validate();
  detail::Stopwatch clock;
  RunTrace trace;
  Rng rng(cfg.seed);
  const Index n = oracle.dimension();
  Matrix V = Matrix::Identity(n, n);
  int vexp = 0;
  double log_abs_det = 0.0;
  const double log_shrink = std::log(1.0 - 1.0 / cfg.dilation_beta);

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const Vector u = random_normal_vector(n, rng);
    const Vector h = transformed_argmin(oracle, V, u).point;
    const Vector p = transformed_argmin(oracle, V, h).point;
    TraceRow row;
    row.k = k;
    row.step_norm = detail::scaled(h.norm(), vexp);
    row.statistic = detail::scaled(p.dot(h), 2 * vexp);
    row.cosine = cosine(p, h);
    if (cfg.record_metric) detail::record_factor_metric(row, V, vexp, log_abs_det);
    trace.rows.push_back(row);
    if (cfg.record_path) trace.path.push_back(h * std::ldexp(1.0, vexp));

    if (p.dot(h) > 0.0) {
      trace.outcome = detail::separated_on(oracle, -(V.transpose() * h));
      break;
    }
    const Vector e = h - p;
    if (!(e.norm() > kDirectionFloor * (h.norm() + p.norm()))) {
      trace.outcome = detail::plain(OutcomeKind::StepVanished, "h and p coincide");
      break;
    }
    V = shor_dilation(e, cfg.dilation_beta, 0.0).matrix * V;
    log_abs_det += log_shrink;
    detail::renormalize(V, vexp);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

/**
 * BFGS for 0 in C from a start g in C. Certifies membership when
 * ||g|| <= step_tol and stops with StepVanished once ||s|| <= step_tol
 * (or the relative tolerance, when set).
 */
inline RunTrace bfgs_separate(const SupportOracle& oracle, const Vector& start,
                              const SpdMatrix& H0, const SeparatorConfig& cfg = {}) {
  return detail::bfgs_loop(oracle, start, H0, cfg, {true, true});
}

inline RunTrace bfgs_separate(const SupportOracle& oracle, const Vector& start,
                              const SeparatorConfig& cfg = {}) {
  return bfgs_separate(oracle, start, SpdMatrix::identity(start.size()), cfg);
}

/// BFGS for 0 in conv D, D a finite set of nonzero points; no membership test.
inline RunTrace bfgs_separate_hull(const FiniteSetOracle& points, const SpdMatrix& H0,
                                   const SeparatorConfig& cfg = {}) {
  for (const auto& q : points.points())
    if (!(q.norm() > 0.0)) throw Error(ErrorKind::InvalidArgument, "points must be nonzero");
  return detail::bfgs_loop(points, detail::start_point(points, cfg), H0, cfg, {false, false});
}

inline RunTrace bfgs_separate_hull(const FiniteSetOracle& points, const SeparatorConfig& cfg = {}) {
  return bfgs_separate_hull(points, SpdMatrix::identity(points.dimension()), cfg);
}

/// g_+ = s / ||s|| from a unit g0; runs until ||s|| meets the step tolerances.
inline RunTrace unit_ball_iteration(const Vector& g0, const SpdMatrix& H0, const SeparatorConfig& cfg = {}) {
  if (std::abs(g0.norm() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidArgument, "g0 must be a unit vector");
  const BallOracle ball = BallOracle::unit(g0.size());
  return detail::bfgs_loop(ball, g0, H0, cfg, {false, true});
}

/**
 * Central-cut ellipsoid method over the unit ball for the support function
 * of conv D. Starts at x = 0, where the oracle returns the lowest-index point.
 * The normal is x, valid when max_q <q, x> < 0.
 */
inline RunTrace ellipsoid_separate(const FiniteSetOracle& points, const SeparatorConfig& cfg = {}) {
  cfg.validate();
  const Index n = points.dimension();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "the ellipsoid method needs n >= 2");
  detail::Stopwatch clock;
  RunTrace trace;
  Vector x = Vector::Zero(n);
  Matrix H = Matrix::Identity(n, n);

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    TraceRow row;
    row.k = k;
    row.step_norm = x.norm();
    if (cfg.record_metric) detail::record_metric(row, H, 0);
    if (cfg.record_path) trace.path.push_back(x);
    Vector g;
    if (x.norm() > 1.0) {
      g = x;
    } else {
      g = points.argmax_linear(x).point;
      row.statistic = g.dot(x);
      if (g.dot(x) < 0.0) {
        trace.rows.push_back(row);
        trace.outcome = detail::separated_on(points, x);
        break;
      }
    }
    trace.rows.push_back(row);
    if (!(g.dot(H * g) > 0.0) || !H.allFinite()) {
      trace.outcome = detail::plain(OutcomeKind::CurvatureFailure, "ellipsoid shape degenerated");
      break;
    }
    x += detail::ellipsoid_update_in_place(H, g, n);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

/**
 * Cholesky-factored BFGS on a finite point list, mutating an owned copy of
 * the points. The accumulated factor M (current points = M * original)
 * gives the normal -M^T a_i on termination.
 */
inline RunTrace cholesky_bfgs_separate(const std::vector<Vector>& points, const SeparatorConfig& cfg = {}) {
  cfg.validate();
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one point");
  const Index n = points.front().size();
  const Index m = static_cast<Index>(points.size());
  if (cfg.start_index >= points.size()) throw Error(ErrorKind::InvalidArgument, "start index out of range");
  Matrix a(n, m);
  for (Index r = 0; r < m; ++r) {
    const Vector& q = points[static_cast<std::size_t>(r)];
    if (q.size() != n) throw Error(ErrorKind::InvalidArgument, "points differ in dimension");
    if (!(q.norm() > 0.0)) throw Error(ErrorKind::InvalidArgument, "points must be nonzero");
    a.col(r) = q;
  }
  const FiniteSetOracle original(points);
  detail::Stopwatch clock;
  RunTrace trace;
  Matrix M = Matrix::Identity(n, n);
  int aexp = 0;
  int mexp = 0;
  double log_abs_det = 0.0;
  Index i = static_cast<Index>(cfg.start_index);

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const Vector ai = a.col(i);
    const Eigen::RowVectorXd dots = ai.transpose() * a;
    Index j = 0;
    for (Index r = 1; r < m; ++r)
      if (dots(r) < dots(j)) j = r;
    TraceRow row;
    row.k = k;
    row.step_norm = detail::scaled(ai.norm(), aexp);
    row.statistic = detail::scaled(dots(j), 2 * aexp);
    row.cosine = cosine(ai, a.col(j));
    if (cfg.record_metric) detail::record_factor_metric(row, M, mexp, log_abs_det);
    trace.rows.push_back(row);
    if (cfg.record_path) trace.path.push_back(ai * std::ldexp(1.0, aexp));

    if (dots(j) > 0.0) {
      trace.outcome = detail::separated_on(original, -(M.transpose() * ai));
      break;
    }
    const Vector e = ai - a.col(j);
    const double beta = ai.dot(e);
    const double anorm = ai.norm();
    if (!(beta > kCurvatureFloor * anorm * anorm)) {
      trace.outcome = detail::plain(OutcomeKind::CurvatureFailure, "DegenerateCurvature: beta is not positive");
      break;
    }
    const Vector u = e / beta - ai / (anorm * std::sqrt(beta));
    a.noalias() -= u * dots;
    M.noalias() -= u * (ai.transpose() * M);
    log_abs_det += std::log(anorm / std::sqrt(beta));
    i = j;
    detail::renormalize(a, aexp);
    detail::renormalize(M, mexp);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

/**
 * Cholesky BFGS on the two-point set {c, d}; each pass updates both points
 * and swaps them. Rows carry gamma[c, d].
 */
inline RunTrace segment_separate(const Vector& c0, const Vector& d0, const SeparatorConfig& cfg = {}) {
  cfg.validate();
  if (c0.size() != d0.size()) throw Error(ErrorKind::InvalidArgument, "c and d differ in dimension");
  if (!(c0.norm() > 0.0) || !(d0.norm() > 0.0) || c0 == d0)
    throw Error(ErrorKind::InvalidArgument, "c and d must be distinct and nonzero");
  const FiniteSetOracle original({c0, d0});
  detail::Stopwatch clock;
  RunTrace trace;
  const Index n = c0.size();
  Matrix cd(n, 2);
  cd.col(0) = c0;
  cd.col(1) = d0;
  Matrix M = Matrix::Identity(n, n);
  int pexp = 0;
  int mexp = 0;
  double log_abs_det = 0.0;

  for (std::int64_t k = 0; k < cfg.max_iterations; ++k) {
    const Vector c = cd.col(0);
    const Vector d = cd.col(1);
    const double cd_dot = c.dot(d);
    TraceRow row;
    row.k = k;
    row.step_norm = detail::scaled(c.norm(), pexp);
    row.statistic = detail::scaled(cd_dot, 2 * pexp);
    row.cosine = cosine(c, d);
    row.gamma = segment_gamma(c, d);
    if (cfg.record_metric) detail::record_factor_metric(row, M, mexp, log_abs_det);
    trace.rows.push_back(row);
    if (cfg.record_path) trace.path.push_back(c * std::ldexp(1.0, pexp));

    if (cd_dot > 0.0) {
      trace.outcome = detail::separated_on(original, -(M.transpose() * c));
      break;
    }
    const Vector e = c - d;
    const double beta = c.dot(e);
    const double cnorm = c.norm();
    if (!(beta > kCurvatureFloor * cnorm * cnorm)) {
      trace.outcome = detail::plain(OutcomeKind::CurvatureFailure, "DegenerateCurvature: beta is not positive");
      break;
    }
    const Vector u = e / beta - c / (cnorm * std::sqrt(beta));
    cd.col(0) = d - cd_dot * u;
    cd.col(1) = c - c.squaredNorm() * u;
    M.noalias() -= u * (c.transpose() * M);
    log_abs_det += std::log(cnorm / std::sqrt(beta));
    detail::renormalize(cd, pexp);
    detail::renormalize(M, mexp);
  }
  trace.wall_seconds = clock.seconds();
  return trace;
}

}  // namespace rescale

#endif  // RESCALE_SEPARATORS_HPP
