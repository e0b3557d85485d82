#ifndef RESCALE_TYPES_HPP
#define RESCALE_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace rescale {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class ErrorKind {
  DegenerateDirection,
  InvalidDilation,
  CurvatureViolation,
  NonDescentDirection,
  DegenerateCurvature,
  DegenerateGradient,
  ZeroDirection,
  NotPositiveDefinite,
  OracleDisagreement,
  InvalidArgument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::InvalidDilation: return "InvalidDilation";
    case ErrorKind::CurvatureViolation: return "CurvatureViolation";
    case ErrorKind::NonDescentDirection: return "NonDescentDirection";
    case ErrorKind::DegenerateCurvature: return "DegenerateCurvature";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::ZeroDirection: return "ZeroDirection";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::OracleDisagreement: return "OracleDisagreement";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Eigenvalue extremes of a symmetric matrix.
struct Spectrum {
  double lambda_min = kNaN;
  double lambda_max = kNaN;
};

/**
 * Symmetric positive-definite matrix, used as the inverse-Hessian metric.
 *
 * The public constructor validates symmetry (1e-12 per entry, absolute) and
 * positive definiteness through a Cholesky attempt. Update kernels build their
 * results through trusted(), which only validates when RESCALE_VALIDATE is
 * defined (the test builds define it).
 */
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix m) : m_(std::move(m)) { validate(); }

  static SpdMatrix identity(Index n) { return trusted(Matrix::Identity(n, n)); }

  static SpdMatrix trusted(Matrix m) {
    SpdMatrix out{std::move(m), TrustedTag{}};
#ifdef RESCALE_VALIDATE
    out.validate();
#endif
    return out;
  }

  const Matrix& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }

  double log_det() const {
    Eigen::LLT<Matrix> llt(m_);
    if (llt.info() != Eigen::Success) return kNaN;
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }

  double det() const { return std::exp(log_det()); }

  Spectrum spectrum() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }

  /// Positive scalar multiple; used to keep long runs inside the double range.
  SpdMatrix scaled(double factor) const { return SpdMatrix{m_ * factor, TrustedTag{}}; }

  void validate() const {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
      throw Error(ErrorKind::InvalidArgument, "metric must be a nonempty square matrix");
    if (!m_.allFinite()) throw Error(ErrorKind::NotPositiveDefinite, "metric has non-finite entries");
    if (((m_ - m_.transpose()).array().abs() > 1e-12).any())
      throw Error(ErrorKind::NotPositiveDefinite, "metric is not symmetric");
    Eigen::LLT<Matrix> llt(m_);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
  }

 private:
  struct TrustedTag {};
  SpdMatrix(Matrix m, TrustedTag) : m_(std::move(m)) {}

  Matrix m_;
};

enum class TransformKind { ShorDilation, BfgsFactor, Identity };

/// An invertible matrix accumulated from rank-one rescalings (V, W or T).
struct RescalingTransform {
  Matrix matrix;
  TransformKind kind = TransformKind::Identity;

  static RescalingTransform identity(Index n) {
    return {Matrix::Identity(n, n), TransformKind::Identity};
  }

  Index dim() const noexcept { return matrix.rows(); }

  /// H = T^T T for a factor T.
  Matrix gram() const { return matrix.transpose() * matrix; }
};

inline Vector random_normal_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Matrix random_normal_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // column-major fill, fixed order for reproducibility
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

/// Componentwise standard normal, then normalized.
inline Vector random_unit_vector(Index n, Rng& rng) {
  for (;;) {
    Vector v = random_normal_vector(n, rng);
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

/// Per-run RNG stream: base seed XOR run index.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t run_index) {
  return base_seed ^ run_index;
}

inline double cosine(const Vector& a, const Vector& b) {
  const double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : kNaN;
}

namespace detail {

// Binary exponent of the largest magnitude entry; 0 for an all-zero or
// non-finite argument.
template <typename Derived>
int magnitude_exponent(const Eigen::MatrixBase<Derived>& m) {
  const double peak = m.cwiseAbs().maxCoeff();
  if (!(peak > 0.0) || !std::isfinite(peak)) return 0;
  int exponent = 0;
  std::frexp(peak, &exponent);
  return exponent;
}

inline constexpr int kRescaleThreshold = 32;

}  // namespace detail

}  // namespace rescale

#endif  // RESCALE_TYPES_HPP
