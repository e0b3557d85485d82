#ifndef RESCALE_UPDATES_HPP
#define RESCALE_UPDATES_HPP

#include "rescale/types.hpp"

#include <cmath>
#include <string>

/*
 * Rank-one rescaling kernels: Shor space dilation, the unit-step BFGS update
 * in inverse-Hessian and factored forms, the non-symmetric BFGS-style
 * transform used by the Cholesky separators, and the ellipsoid update.
 *
 * All functions are pure; inputs are never modified.
 */

namespace rescale {

inline constexpr double kDirectionFloor = 1e-14;
inline constexpr double kCurvatureFloor = 1e-14;

/// Quantities of one unit-step update: s = -H g, y = g_plus - g.
struct UpdateInputs {
  Vector g;
  Vector g_plus;
  Vector s;
  Vector y;

  double curvature() const { return s.dot(y); }

  static UpdateInputs from_metric(const Matrix& H, const Vector& g, const Vector& g_plus) {
    Vector s = -(H * g);
    Vector y = g_plus - g;
    return {g, g_plus, std::move(s), std::move(y)};
  }
};

inline bool curvature_acceptable(const Vector& s, const Vector& y) {
  const double sy = s.dot(y);
  return sy > kCurvatureFloor * s.norm() * y.norm() && sy > 0.0;
}

/// W = I - e e^T / (beta ||e||^2). Contracts e by 1 - 1/beta, fixes e's complement.
inline RescalingTransform shor_dilation(const Vector& e, double beta = 2.0,
                                        double floor = kDirectionFloor) {
  if (!(beta > 1.0)) throw Error(ErrorKind::InvalidDilation, "beta must exceed 1");
  const double norm2 = e.squaredNorm();
  if (!(std::sqrt(norm2) > floor))
    throw Error(ErrorKind::DegenerateDirection, "dilation direction is numerically zero");
  Matrix W = Matrix::Identity(e.size(), e.size());
  W.noalias() -= (e * e.transpose()) / (beta * norm2);
  return {std::move(W), TransformKind::ShorDilation};
}

namespace detail {

// The expanded unit-step update on a raw matrix; the caller has checked curvature.
inline void bfgs_update_in_place(Matrix& H, const Vector& s, const Vector& y) {
  const double rho = s.dot(y);
  const Vector Hy = H * y;
  const double yHy = y.dot(Hy);
  H.noalias() -= (s * Hy.transpose() + Hy * s.transpose()) / rho;
  H.noalias() += ((1.0 + yHy / rho) / rho) * (s * s.transpose());
  H = 0.5 * (H + H.transpose()).eval();
}

}  // namespace detail

/**
 * Unit-step BFGS update of the inverse Hessian approximation.
 *
 * With s = -H g and y = g_plus - g, returns
 *   H_+ = V H V^T + s s^T / (s^T y),   V = I - s y^T / (s^T y),
 * evaluated in the equivalent O(n^2) expanded form and re-symmetrized.
 * Throws CurvatureViolation when s^T y <= 1e-14 ||s|| ||y||.
 */
inline SpdMatrix bfgs_update(const SpdMatrix& H, const UpdateInputs& in) {
  if (!curvature_acceptable(in.s, in.y))
    throw Error(ErrorKind::CurvatureViolation,
                "s^T y = " + std::to_string(in.curvature()) + " is not positive");
  Matrix out = H.matrix();
  detail::bfgs_update_in_place(out, in.s, in.y);
  return SpdMatrix::trusted(std::move(out));
}

inline SpdMatrix bfgs_update(const SpdMatrix& H, const Vector& g, const Vector& g_plus) {
  if (!(g.norm() > 0.0)) throw Error(ErrorKind::DegenerateGradient, "g must be nonzero");
  return bfgs_update(H, UpdateInputs::from_metric(H.matrix(), g, g_plus));
}

/**
 * Factored BFGS update: for H = T^T T returns T_+ = T (I - q s^T) with
 * q = y / (s^T y) + g / sqrt(-s^T g * s^T y), so that T_+^T T_+ = bfgs_update(H).
 */
inline RescalingTransform bfgs_update_factored(const RescalingTransform& T, const Vector& g,
                                               const Vector& g_plus) {
  const Vector s = -(T.matrix.transpose() * (T.matrix * g));
  if (!(s.norm() > kDirectionFloor)) throw Error(ErrorKind::DegenerateGradient, "s = -T^T T g vanished");
  const Vector y = g_plus - g;
  const double sg = s.dot(g);
  if (!(sg < 0.0)) throw Error(ErrorKind::NonDescentDirection, "s^T g must be negative");
  if (!curvature_acceptable(s, y))
    throw Error(ErrorKind::CurvatureViolation, "s^T y is not positive");
  const double sy = s.dot(y);
  const Vector q = y / sy + g / std::sqrt(-sg * sy);
  Matrix out = T.matrix;
  out.noalias() -= (T.matrix * q) * s.transpose();
  return {std::move(out), TransformKind::BfgsFactor};
}

/**
 * BFGS-style transform for the Cholesky separators:
 *   W = I - e h^T / beta + h h^T / (||h|| sqrt(beta)),  e = h - p,  beta = h^T e.
 * A rank-one, generally non-symmetric perturbation of the identity.
 */
inline RescalingTransform bfgs_w_matrix(const Vector& h, const Vector& p,
                                        double floor = kCurvatureFloor) {
  const double hnorm = h.norm();
  if (!(hnorm > 0.0)) throw Error(ErrorKind::DegenerateDirection, "h must be nonzero");
  const Vector e = h - p;
  const double beta = h.dot(e);
  if (!(beta > floor * hnorm * hnorm))
    throw Error(ErrorKind::DegenerateCurvature, "beta = h^T (h - p) is not positive");
  const Vector u = e / beta - h / (hnorm * std::sqrt(beta));
  Matrix W = Matrix::Identity(h.size(), h.size());
  W.noalias() -= u * h.transpose();
  return {std::move(W), TransformKind::BfgsFactor};
}

struct EllipsoidStep {
  Vector step;
  SpdMatrix H_plus;
};

namespace detail {

// Central-cut step on a raw matrix: updates H, returns the center increment.
inline Vector ellipsoid_update_in_place(Matrix& H, const Vector& g, Index n) {
  const Vector s = -(H * g);
  const double sg = s.dot(g);
  const double nn = static_cast<double>(n);
  Vector step = s / ((nn + 1.0) * std::sqrt(-sg));
  H.noalias() += (2.0 / ((nn + 1.0) * sg)) * (s * s.transpose());
  H *= nn * nn / (nn * nn - 1.0);
  H = 0.5 * (H + H.transpose()).eval();
  return step;
}

}  // namespace detail

/// Central-cut ellipsoid step for a cut g: returns the center increment and new shape.
inline EllipsoidStep ellipsoid_update(const SpdMatrix& H, const Vector& g, Index n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "ellipsoid update needs n >= 2");
  if (!(g.norm() > kDirectionFloor)) throw Error(ErrorKind::DegenerateGradient, "cut g is numerically zero");
  Matrix next = H.matrix();
  Vector step = detail::ellipsoid_update_in_place(next, g, n);
  return {std::move(step), SpdMatrix::trusted(std::move(next))};
}

/// (I - z z^T) H (I - z z^T) + z z^T for a unit z and any symmetric H.
inline Matrix norm_one_update(const Matrix& H, const Vector& z) {
  const Index n = z.size();
  const Matrix P = Matrix::Identity(n, n) - z * z.transpose();
  Matrix out = P * H * P + z * z.transpose();
  return 0.5 * (out + out.transpose());
}

/// The BFGS update of 1/2 ||x||^2 at a fixed point, with z = s / ||s||.
inline SpdMatrix norm_one_update(const SpdMatrix& H, const Vector& z) {
  return SpdMatrix::trusted(norm_one_update(H.matrix(), z));
}

}  // namespace rescale

#endif  // RESCALE_UPDATES_HPP
