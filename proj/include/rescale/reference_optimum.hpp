#ifndef RESCALE_REFERENCE_OPTIMUM_HPP
#define RESCALE_REFERENCE_OPTIMUM_HPP

#include "rescale/oracles.hpp"
#include "rescale/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

/*
 * Independent minimizers for max-of-quadratics objectives, used only to
 * supply f* to gap plots and tests. Nothing here shares code with the
 * BFGS loops under test.
 */

namespace rescale {

struct MinNormPoint {
  Vector point;       // nearest point of the hull to 0
  Vector weights;     // convex weights on the input points
  double distance = kNaN;
  double lower_bound = 0.0;  // certified lower bound on dist(0, hull)
  double fw_gap = kNaN;
  std::int64_t iterations = 0;
};

/**
 * Away-step Frank-Wolfe for the point of conv{q_i} nearest the origin.
 * lower_bound = max(0, min_i <q_i, v> / ||v||) holds for every iterate v.
 */
inline MinNormPoint min_norm_point(const std::vector<Vector>& points, double tol = 1e-15,
                                   std::int64_t max_iterations = 100000) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one point");
  const Index n = points.front().size();
  const Index m = static_cast<Index>(points.size());
  Matrix Q(n, m);
  for (Index i = 0; i < m; ++i) Q.col(i) = points[static_cast<std::size_t>(i)];

  Vector w = Vector::Zero(m);
  Index start = 0;
  for (Index i = 1; i < m; ++i)
    if (Q.col(i).squaredNorm() < Q.col(start).squaredNorm()) start = i;
  w(start) = 1.0;
  Vector v = Q.col(start);
  MinNormPoint out;
  double best_lower = 0.0;
  std::int64_t k = 0;
  double gap = kNaN;
  for (; k < max_iterations; ++k) {
    const Eigen::RowVectorXd dots = v.transpose() * Q;
    const double vv = v.squaredNorm();
    Index fw = 0;
    for (Index i = 1; i < m; ++i)
      if (dots(i) < dots(fw)) fw = i;
    if (vv > 0.0) best_lower = std::max(best_lower, dots(fw) / std::sqrt(vv));
    Index away = -1;
    for (Index i = 0; i < m; ++i)
      if (w(i) > 0.0 && (away < 0 || dots(i) > dots(away))) away = i;
    gap = vv - dots(fw);
    if (!(gap > tol * std::max(1.0, vv))) break;
    const double away_gap = dots(away) - vv;
    Vector direction;
    double max_step;
    bool toward = gap >= away_gap;
    if (toward) {
      direction = Q.col(fw) - v;
      max_step = 1.0;
    } else {
      direction = v - Q.col(away);
      max_step = w(away) / (1.0 - w(away));
      if (!(max_step > 0.0) || !std::isfinite(max_step)) {
        toward = true;
        direction = Q.col(fw) - v;
        max_step = 1.0;
      }
    }
    const double dd = direction.squaredNorm();
    if (!(dd > 0.0)) break;
    const double step = std::clamp(-v.dot(direction) / dd, 0.0, max_step);
    if (toward) {
      w *= (1.0 - step);
      w(fw) += step;
    } else {
      w *= (1.0 + step);
      w(away) -= step;
      if (step == max_step) w(away) = 0.0;
    }
    w = w.cwiseMax(0.0);
    w /= w.sum();
    v = Q * w;
  }
  out.point = v;
  out.weights = w;
  out.distance = v.norm();
  out.lower_bound = best_lower;
  out.fw_gap = gap;
  out.iterations = k;
  return out;
}

struct ReferenceOptimum {
  double f_star = kNaN;
  Vector x_star;
  double dual_value = kNaN;     // route (a): best dual bound
  double barrier_value = kNaN;  // route (b): primal value from the barrier path
  double stationarity = kNaN;   // dist(0, conv of active gradients at x_star)
};

namespace detail {

struct DualPoint {
  Matrix P;
  Vector b;
  double c = 0.0;
  Vector x;
  double value = kNaN;
};

inline DualPoint dual_point(const std::vector<QuadraticPiece>& pieces, const Vector& lambda) {
  const Index n = pieces.front().b.size();
  DualPoint d;
  d.P = Matrix::Zero(n, n);
  d.b = Vector::Zero(n);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const double l = lambda(static_cast<Index>(i));
    if (l == 0.0) continue;
    d.P += l * pieces[i].P;
    d.b += l * pieces[i].b;
    d.c += l * pieces[i].c;
  }
  Eigen::LLT<Matrix> llt(d.P);
  d.x = -llt.solve(d.b);
  d.value = 0.5 * d.x.dot(d.P * d.x) + d.b.dot(d.x) + d.c;
  return d;
}

/*
 * Route (a): maximize the concave dual phi(lambda) = min_x sum lambda_i q_i(x)
 * over the simplex by away-step Frank-Wolfe. The FW gap at lambda equals
 * f(x_lambda) - phi(lambda), a primal-dual gap. Line searches solve
 * phi'(t) = 0 by safeguarded Newton (phi'' = -r^T P^-1 r).
 */
inline std::pair<double, Vector> dual_route(const MaxQuadSubdiff& f, double tol, std::int64_t max_iterations) {
  const auto& pieces = f.pieces();
  const Index m = static_cast<Index>(pieces.size());
  Vector lambda = Vector::Zero(m);
  {
    // start at the piece whose own minimum is largest
    Index best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < m; ++i) {
      Vector e = Vector::Zero(m);
      e(i) = 1.0;
      const double v = dual_point(pieces, e).value;
      if (v > best_value) {
        best = i;
        best_value = v;
      }
    }
    lambda(best) = 1.0;
  }
  double best_primal = std::numeric_limits<double>::infinity();
  Vector best_x;
  for (std::int64_t k = 0; k < max_iterations; ++k) {
    const DualPoint d = dual_point(pieces, lambda);
    const Vector q = f.piece_values(d.x);
    const double fx = q.maxCoeff();
    if (fx < best_primal) {
      best_primal = fx;
      best_x = d.x;
    }
    Index fw = 0;
    q.maxCoeff(&fw);
    Index away = -1;
    for (Index i = 0; i < m; ++i)
      if (lambda(i) > 0.0 && (away < 0 || q(i) < q(away))) away = i;
    const double avg = lambda.dot(q);
    const double fw_gap = q(fw) - avg;
    if (!(best_primal - d.value > tol * std::max(1.0, std::abs(d.value)))) break;
    Vector dir = Vector::Zero(m);
    double tmax = 1.0;
    if (fw_gap >= avg - q(away)) {
      dir = -lambda;
      dir(fw) += 1.0;
    } else {
      dir = lambda;
      dir(away) -= 1.0;
      tmax = lambda(away) / (1.0 - lambda(away));
      if (!std::isfinite(tmax)) tmax = 1e300;
    }
    // phi'(t) = sum dir_i q_i(x(t)); Newton with bisection on [lo, hi]
    auto derivative = [&](double t, double* second) {
      const DualPoint p = dual_point(pieces, lambda + t * dir);
      Matrix Pd = Matrix::Zero(p.P.rows(), p.P.cols());
      Vector bd = Vector::Zero(p.b.size());
      double slope = 0.0;
      for (Index i = 0; i < m; ++i) {
        if (dir(i) == 0.0) continue;
        Pd += dir(i) * pieces[static_cast<std::size_t>(i)].P;
        bd += dir(i) * pieces[static_cast<std::size_t>(i)].b;
        slope += dir(i) * pieces[static_cast<std::size_t>(i)].value(p.x);
      }
      const Vector r = Pd * p.x + bd;
      *second = -r.dot(p.P.llt().solve(r));
      return slope;
    };
    double second = 0.0;
    double lo = 0.0;
    double hi = tmax;
    double t;
    if (derivative(hi, &second) >= 0.0) {
      t = hi;
    } else {
      t = 0.0;
      for (int it = 0; it < 100; ++it) {
        const double slope = derivative(t, &second);
        if (slope > 0.0) lo = t; else hi = t;
        double next = second < 0.0 ? t - slope / second : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-16 * std::max(1.0, t) || hi - lo <= 1e-16 * std::max(1.0, hi)) {
          t = next;
          break;
        }
        t = next;
      }
    }
    if (!(t > 0.0)) break;
    lambda += t * dir;
    lambda = lambda.cwiseMax(0.0);
    lambda /= lambda.sum();
  }
  const DualPoint d = dual_point(pieces, lambda);
  const double value = f.value(d.x);
  if (value < best_primal) {
    best_primal = value;
    best_x = d.x;
  }
  return {d.value, best_x};
}

/*
 * Route (b): primal log-barrier Newton on (x, t) for min t s.t. q_i(x) <= t,
 * following the central path tau -> infinity.
 */
inline Vector barrier_route(const MaxQuadSubdiff& f, double tol) {
  const auto& pieces = f.pieces();
  const Index n = f.dimension();
  const Index m = static_cast<Index>(pieces.size());
  Vector x = Vector::Zero(n);
  double t = f.value(x) + 1.0;
  auto objective = [&](const Vector& xx, double tt, double tau, bool* feasible) {
    double sum = tau * tt;
    *feasible = true;
    for (const auto& q : pieces) {
      const double slack = tt - q.value(xx);
      if (!(slack > 0.0)) {
        *feasible = false;
        return std::numeric_limits<double>::infinity();
      }
      sum -= std::log(slack);
    }
    return sum;
  };
  for (double tau = 1.0;; tau *= 10.0) {
    for (int it = 0; it < 200; ++it) {
      Matrix Hs = Matrix::Zero(n + 1, n + 1);
      Vector grad = Vector::Zero(n + 1);
      grad(n) = tau;
      for (const auto& q : pieces) {
        const double slack = t - q.value(x);
        const Vector gq = q.gradient(x);
        grad.head(n) += gq / slack;
        grad(n) -= 1.0 / slack;
        Hs.topLeftCorner(n, n) += q.P / slack + gq * gq.transpose() / (slack * slack);
        Hs.topRightCorner(n, 1) -= gq / (slack * slack);
        Hs(n, n) += 1.0 / (slack * slack);
      }
      Hs.bottomLeftCorner(1, n) = Hs.topRightCorner(n, 1).transpose();
      const Vector step = -Hs.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 1e-20)) break;
      bool feasible = false;
      const double current = objective(x, t, tau, &feasible);
      double a = 1.0;
      for (int ls = 0; ls < 80; ++ls, a *= 0.5) {
        const double trial = objective(x + a * step.head(n), t + a * step(n), tau, &feasible);
        if (feasible && trial <= current - 0.25 * a * decrement) break;
      }
      if (!feasible) break;
      x += a * step.head(n);
      t += a * step(n);
      if (decrement < 1e-24) break;
    }
    if (static_cast<double>(m) / tau < tol * std::max(1.0, std::abs(t)) * 1e-2) break;
    if (tau > 1e18) break;
  }
  return x;
}

}  // namespace detail

/**
 * Minimum of a max of strictly convex quadratics by two independent routes
 * (dual Frank-Wolfe, primal barrier). Throws OracleDisagreement unless the
 * routes agree within agree_tol * max(1, |f*|) and the active gradients at
 * x* contain a point within stationarity_tol of the origin.
 */
inline ReferenceOptimum reference_optimum(const MaxQuadSubdiff& f, double agree_tol = 1e-9,
                                          double stationarity_tol = 1e-7) {
  ReferenceOptimum out;
  const auto [dual_value, dual_x] = detail::dual_route(f, 1e-13, 200000);
  const Vector barrier_x = detail::barrier_route(f, 1e-13);
  const double dual_primal = f.value(dual_x);
  const double barrier_primal = f.value(barrier_x);
  out.dual_value = dual_value;
  out.barrier_value = barrier_primal;
  if (dual_primal <= barrier_primal) {
    out.f_star = dual_primal;
    out.x_star = dual_x;
  } else {
    out.f_star = barrier_primal;
    out.x_star = barrier_x;
  }
  const double scale = std::max(1.0, std::abs(out.f_star));
  if (std::abs(dual_primal - barrier_primal) > agree_tol * scale)
    throw Error(ErrorKind::OracleDisagreement, "dual and barrier routes differ: " +
                                                   std::to_string(dual_primal) + " vs " +
                                                   std::to_string(barrier_primal));
  // active gradients at x*, with a tolerance wide enough for the solver accuracy
  const Vector values = f.piece_values(out.x_star);
  std::vector<Vector> grads;
  for (Index i = 0; i < values.size(); ++i)
    if (values(i) >= out.f_star - 1e-7 * scale)
      grads.push_back(f.pieces()[static_cast<std::size_t>(i)].gradient(out.x_star));
  out.stationarity = min_norm_point(grads, 1e-20).distance;
  if (!(out.stationarity <= stationarity_tol))
    throw Error(ErrorKind::OracleDisagreement,
                "stationarity certificate fails: " + std::to_string(out.stationarity));
  return out;
}

}  // namespace rescale

#endif  // RESCALE_REFERENCE_OPTIMUM_HPP
