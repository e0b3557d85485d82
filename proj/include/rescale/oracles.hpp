#ifndef RESCALE_ORACLES_HPP
#define RESCALE_ORACLES_HPP

#include "rescale/types.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

/*
 * Linear-optimization (support function) oracles over compact sets.
 *
 * Every oracle maximizes <., d> over its set. Minimization goes through
 * argmin_linear, which negates the direction. Ties always break to the lowest
 * index so traces are reproducible.
 */

namespace rescale {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct LinearOptimum {
  Vector point;
  double value = kNaN;
  std::size_t index = kNoIndex;  // position in a finite set, if any
};

class SupportOracle {
 public:
  virtual ~SupportOracle() = default;

  /// A maximizer of <., direction> over the set and the maximal value.
  virtual LinearOptimum argmax_linear(const Vector& direction) const = 0;
  virtual Index dimension() const = 0;
  virtual std::string description() const = 0;
};

class FiniteSetOracle final : public SupportOracle {
 public:
  explicit FiniteSetOracle(std::vector<Vector> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorKind::InvalidArgument, "finite set must be nonempty");
    const Index n = points_.front().size();
    for (const auto& p : points_) {
      if (p.size() != n) throw Error(ErrorKind::InvalidArgument, "points differ in dimension");
      if (!p.allFinite()) throw Error(ErrorKind::InvalidArgument, "points must be finite");
    }
  }

  LinearOptimum argmax_linear(const Vector& direction) const override {
    std::size_t best = 0;
    double best_value = points_[0].dot(direction);
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const double v = points_[i].dot(direction);
      if (v > best_value) {
        best = i;
        best_value = v;
      }
    }
    return {points_[best], best_value, best};
  }

  Index dimension() const override { return points_.front().size(); }

  std::string description() const override {
    std::ostringstream os;
    os << "finite set of " << points_.size() << " points in R^" << dimension();
    return os.str();
  }

  const std::vector<Vector>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const Vector& operator[](std::size_t i) const { return points_.at(i); }

 private:
  std::vector<Vector> points_;
};

/// The two endpoints of a segment [c, d]; its hull is the segment.
inline FiniteSetOracle segment_oracle(const Vector& c, const Vector& d) {
  return FiniteSetOracle({c, d});
}

/// Boundary of the ellipsoid A B - c, with B the closed unit ball.
class EllipsoidOracle final : public SupportOracle {
 public:
  EllipsoidOracle(Matrix A, Vector c, double floor = 1e-14)
      : A_(std::move(A)), c_(std::move(c)), floor_(floor) {
    if (A_.rows() != A_.cols() || A_.rows() != c_.size())
      throw Error(ErrorKind::InvalidArgument, "ellipsoid shape and offset disagree");
    Eigen::FullPivLU<Matrix> lu(A_);
    if (!lu.isInvertible()) throw Error(ErrorKind::InvalidArgument, "ellipsoid matrix is singular");
  }

  LinearOptimum argmax_linear(const Vector& direction) const override {
    const Vector w = A_.transpose() * direction;
    const double wn = w.norm();
    if (!(wn > floor_))
      throw Error(ErrorKind::ZeroDirection, "direction is numerically zero");
    Vector point = A_ * (w / wn) - c_;
    const double value = point.dot(direction);
    return {std::move(point), value, kNoIndex};
  }

  Index dimension() const override { return c_.size(); }
  std::string description() const override { return "ellipsoid A B - c"; }

  const Matrix& shape() const noexcept { return A_; }
  const Vector& offset() const noexcept { return c_; }

 private:
  Matrix A_;
  Vector c_;
  double floor_;
};

/// Closed ball center + radius B (the unit ball by default).
class BallOracle final : public SupportOracle {
 public:
  explicit BallOracle(Vector center, double radius = 1.0, double floor = 1e-14)
      : center_(std::move(center)), radius_(radius), floor_(floor) {
    if (!(radius_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  }

  static BallOracle unit(Index n) { return BallOracle(Vector::Zero(n)); }

  LinearOptimum argmax_linear(const Vector& direction) const override {
    const double norm = direction.norm();
    if (!(norm > floor_)) throw Error(ErrorKind::ZeroDirection, "direction is numerically zero");
    Vector point = center_ + (radius_ / norm) * direction;
    const double value = point.dot(direction);
    return {std::move(point), value, kNoIndex};
  }

  Index dimension() const override { return center_.size(); }
  std::string description() const override { return "ball"; }

  const Vector& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }

 private:
  Vector center_;
  double radius_;
  double floor_;
};

/// A minimizer of <., h> over the set; value is the minimal inner product.
inline LinearOptimum argmin_linear(const SupportOracle& oracle, const Vector& h) {
  LinearOptimum out = oracle.argmax_linear(-h);
  out.value = out.point.dot(h);
  return out;
}

/**
 * Minimizer of <., h> over V Q without materializing V Q:
 * returns V p with p = argmin over Q of <., V^T h>.
 */
inline LinearOptimum transformed_argmin(const SupportOracle& oracle, const Matrix& V,
                                        const Vector& h) {
  LinearOptimum inner = argmin_linear(oracle, V.transpose() * h);
  Vector point = V * inner.point;
  const double value = point.dot(h);
  return {std::move(point), value, inner.index};
}

inline LinearOptimum transformed_argmin(const SupportOracle& oracle,
                                        const RescalingTransform& V, const Vector& h) {
  return transformed_argmin(oracle, V.matrix, h);
}

/// One piece 1/2 x^T P x + b^T x + c of a max-of-quadratics function.
struct QuadraticPiece {
  Matrix P;
  Vector b;
  double c = 0.0;

  double value(const Vector& x) const { return 0.5 * x.dot(P * x) + b.dot(x) + c; }
  Vector gradient(const Vector& x) const { return P * x + b; }
};

/**
 * f(x) = max_i q_i(x) for strictly convex quadratics q_i, with the
 * subdifferential at x taken as the hull of gradients of the active pieces.
 * A piece is active when q_i(x) >= max_j q_j(x) - activity_tol (1 + |max_j q_j(x)|).
 */
class MaxQuadSubdiff {
 public:
  explicit MaxQuadSubdiff(std::vector<QuadraticPiece> pieces, double activity_tol = 1e-10)
      : pieces_(std::move(pieces)), activity_tol_(activity_tol) {
    if (pieces_.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one quadratic");
    const Index n = pieces_.front().b.size();
    for (const auto& q : pieces_) {
      if (q.P.rows() != n || q.P.cols() != n || q.b.size() != n)
        throw Error(ErrorKind::InvalidArgument, "quadratic pieces differ in dimension");
      SpdMatrix check(0.5 * (q.P + q.P.transpose()));
      (void)check;
    }
  }

  Index dimension() const { return pieces_.front().b.size(); }
  const std::vector<QuadraticPiece>& pieces() const noexcept { return pieces_; }
  double activity_tol() const noexcept { return activity_tol_; }

  Vector piece_values(const Vector& x) const {
    Vector v(static_cast<Index>(pieces_.size()));
    for (std::size_t i = 0; i < pieces_.size(); ++i) v(static_cast<Index>(i)) = pieces_[i].value(x);
    return v;
  }

  double value(const Vector& x) const { return piece_values(x).maxCoeff(); }

  std::vector<std::size_t> active_set(const Vector& x) const {
    return active_among(piece_values(x));
  }

  /// Gradient of the active piece maximizing <grad, s>; lowest index on ties.
  Vector subdiff_argmax(const Vector& x, const Vector& s) const {
    const auto active = active_set(x);
    std::size_t best = active.front();
    Vector best_grad = pieces_[best].gradient(x);
    double best_value = best_grad.dot(s);
    for (std::size_t k = 1; k < active.size(); ++k) {
      Vector grad = pieces_[active[k]].gradient(x);
      const double v = grad.dot(s);
      if (v > best_value) {
        best = active[k];
        best_value = v;
        best_grad = std::move(grad);
      }
    }
    return best_grad;
  }

  /// The subdifferential at x as a support oracle over the active gradients.
  FiniteSetOracle subdifferential(const Vector& x) const {
    std::vector<Vector> grads;
    for (std::size_t i : active_set(x)) grads.push_back(pieces_[i].gradient(x));
    return FiniteSetOracle(std::move(grads));
  }

 private:
  std::vector<std::size_t> active_among(const Vector& values) const {
    const double top = values.maxCoeff();
    const double cut = top - activity_tol_ * (1.0 + std::abs(top));
    std::vector<std::size_t> out;
    for (Index i = 0; i < values.size(); ++i)
      if (values(i) >= cut) out.push_back(static_cast<std::size_t>(i));
    return out;
  }

  std::vector<QuadraticPiece> pieces_;
  double activity_tol_;
};

inline Vector subdiff_argmax(const MaxQuadSubdiff& f, const Vector& x, const Vector& s) {
  return f.subdiff_argmax(x, s);
}

}  // namespace rescale

#endif  // RESCALE_ORACLES_HPP
