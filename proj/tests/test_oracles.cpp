#include "rescale/instances.hpp"
#include "rescale/oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rescale;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Frozen: maximum of <., (1, 1)> over 10^6 uniformly sampled boundary points of diag(1, 10) B.
constexpr double kSampledEllipsoidMax = 10.049875620899112;

// Max-of-quadratics whose first k pieces all attain the max at x.
MaxQuadSubdiff kinked_instance(std::uint64_t seed, const Vector& x, std::size_t k) {
  auto pieces = gen_max_quadratics(x.size(), 4, seed).pieces();
  double top = -1e300;
  for (const auto& q : pieces) top = std::max(top, q.value(x));
  for (std::size_t i = 0; i < k; ++i) pieces[i].c += top - pieces[i].value(x);
  return MaxQuadSubdiff(pieces);
}

}  // namespace

TEST(FiniteSetOracle, AxisCase) {
  const FiniteSetOracle q({vec({1, 0}), vec({0, 1})});
  const auto opt = q.argmax_linear(vec({1, 0}));
  EXPECT_EQ(opt.point, vec({1, 0}));
  EXPECT_EQ(opt.value, 1.0);
  EXPECT_EQ(opt.index, 0u);
}

TEST(FiniteSetOracle, TiesBreakToLowestIndex) {
  const FiniteSetOracle q({vec({0, 1}), vec({1, 1}), vec({1, 1})});
  EXPECT_EQ(q.argmax_linear(vec({1, 0})).index, 1u);
  EXPECT_EQ(q.argmax_linear(vec({0, 0})).index, 0u);
}

TEST(FiniteSetOracle, ValueDominatesEveryPoint) {
  Rng rng(1);
  std::vector<Vector> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(random_normal_vector(4, rng));
  const FiniteSetOracle q(pts);
  for (int t = 0; t < 200; ++t) {
    const Vector s = random_normal_vector(4, rng);
    const auto opt = q.argmax_linear(s);
    EXPECT_EQ(opt.value, opt.point.dot(s));
    for (const auto& p : pts) EXPECT_GE(opt.value, p.dot(s));
  }
}

TEST(FiniteSetOracle, RejectsBadSets) {
  EXPECT_THROW(FiniteSetOracle({}), Error);
  EXPECT_THROW(FiniteSetOracle({vec({1, 0}), vec({1})}), Error);
  EXPECT_THROW(FiniteSetOracle({vec({NAN, 0})}), Error);
}

TEST(EllipsoidOracle, DiagonalExample) {
  const EllipsoidOracle e(Vector(vec({1, 10})).asDiagonal().toDenseMatrix(), vec({0, 0}));
  const auto opt = e.argmax_linear(vec({1, 1}));
  const double r = std::sqrt(101.0);
  EXPECT_TRUE(opt.point.isApprox(vec({1 / r, 100 / r}), 1e-15));
  EXPECT_NEAR(opt.value, 101.0 / r, 1e-13);
  EXPECT_NEAR(opt.value, kSampledEllipsoidMax, 1e-4);
}

TEST(EllipsoidOracle, BoundaryPointsAndZeroDirection) {
  Rng rng(2);
  const Matrix A = random_normal_matrix(3, 3, rng) + 2.0 * Matrix::Identity(3, 3);
  const Vector c = random_normal_vector(3, rng);
  const EllipsoidOracle e(A, c);
  for (int t = 0; t < 50; ++t) {
    const Vector s = random_normal_vector(3, rng);
    const auto opt = e.argmax_linear(s);
    EXPECT_NEAR((A.inverse() * (opt.point + c)).norm(), 1.0, 1e-12);
    EXPECT_NEAR(opt.value, opt.point.dot(s), 1e-12 * (1 + std::abs(opt.value)));
    for (int u = 0; u < 20; ++u) EXPECT_GE(opt.value + 1e-12, (A * random_unit_vector(3, rng) - c).dot(s));
  }
  try {
    e.argmax_linear(Vector::Zero(3));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::ZeroDirection);
  }
}

TEST(BallOracle, Normalization) {
  const auto opt = BallOracle::unit(2).argmax_linear(vec({3, 4}));
  EXPECT_TRUE(opt.point.isApprox(vec({0.6, 0.8}), 1e-15));
  EXPECT_NEAR(opt.value, 5.0, 1e-15);
  EXPECT_THROW(BallOracle::unit(2).argmax_linear(vec({0, 0})), Error);
}

TEST(ArgminLinear, Examples) {
  const FiniteSetOracle q({vec({1, 0}), vec({0, 1})});
  const auto opt = argmin_linear(q, vec({1, 0}));
  EXPECT_EQ(opt.point, vec({0, 1}));
  EXPECT_EQ(opt.value, 0.0);

  const EllipsoidOracle e(Vector(vec({1, 10})).asDiagonal().toDenseMatrix(), vec({2, 0}));
  EXPECT_TRUE(argmin_linear(e, vec({1, 0})).point.isApprox(vec({-3, 0}), 1e-15));

  const Vector c = vec({2, 1});
  const Vector d = vec({-1, 3});
  const auto seg = segment_oracle(c, d);
  EXPECT_EQ(argmin_linear(seg, vec({1, 0})).point, d);
  EXPECT_EQ(argmin_linear(seg, vec({0, 1})).point, c);
}

TEST(TransformedArgmin, IdentityAndDiagonal) {
  const FiniteSetOracle q({vec({1, 0}), vec({0, 1})});
  const auto id = transformed_argmin(q, RescalingTransform::identity(2), vec({1, 0}));
  EXPECT_EQ(id.point, argmin_linear(q, vec({1, 0})).point);
  const Matrix V = Vector(vec({2, 1})).asDiagonal();
  EXPECT_EQ(transformed_argmin(q, V, vec({-1, 0})).point, vec({2, 0}));
}

TEST(TransformedArgmin, MatchesExplicitTransformation) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<Vector> pts;
    for (int i = 0; i < 7; ++i) pts.push_back(random_normal_vector(4, rng));
    const Matrix V = random_normal_matrix(4, 4, rng);
    std::vector<Vector> moved;
    for (const auto& p : pts) moved.push_back(V * p);
    const Vector h = random_normal_vector(4, rng);
    const auto a = transformed_argmin(FiniteSetOracle(pts), V, h);
    const auto b = argmin_linear(FiniteSetOracle(moved), h);
    EXPECT_LE((a.point - b.point).norm(), 1e-10 * (1 + b.point.norm()));
    EXPECT_NEAR(a.value, b.value, 1e-10 * (1 + std::abs(b.value)));
  }
}

TEST(MaxQuadSubdiff, SingleQuadraticReturnsGradient) {
  const MaxQuadSubdiff f({QuadraticPiece{Matrix::Identity(3, 3), Vector::Zero(3), 0.0}});
  Rng rng(4);
  const Vector x = random_normal_vector(3, rng);
  EXPECT_EQ(subdiff_argmax(f, x, random_normal_vector(3, rng)), x);
}

TEST(MaxQuadSubdiff, AbsoluteValueKinkFollowsDirection) {
  const double eps = 1e-9;
  const Matrix P = eps * Matrix::Identity(2, 2);
  const MaxQuadSubdiff f({QuadraticPiece{P, vec({1, 0}), 0.0}, QuadraticPiece{P, vec({-1, 0}), 0.0}});
  EXPECT_EQ(f.active_set(vec({0, 0.5})).size(), 2u);
  EXPECT_TRUE(subdiff_argmax(f, vec({0, 0.5}), vec({2, 1})).isApprox(vec({1, 0.5 * eps}), 1e-15));
  EXPECT_TRUE(subdiff_argmax(f, vec({0, 0.5}), vec({-2, 1})).isApprox(vec({-1, 0.5 * eps}), 1e-15));
}

TEST(MaxQuadSubdiff, MatchesEnumeration) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_normal_vector(5, rng);
    const auto f = kinked_instance(100 + t, x, t % 4);
    const Vector s = random_normal_vector(5, rng);
    const Vector values = f.piece_values(x);
    const double top = values.maxCoeff();
    Vector best;
    for (Index i = 0; i < values.size(); ++i) {
      if (values(i) < top - 1e-10 * (1 + std::abs(top))) continue;
      const Vector grad = f.pieces()[static_cast<std::size_t>(i)].gradient(x);
      if (best.size() == 0 || grad.dot(s) > best.dot(s)) best = grad;
    }
    EXPECT_EQ(subdiff_argmax(f, x, s), best);
  }
}

TEST(MaxQuadSubdiff, SupportValueIsDirectionalDerivative) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_normal_vector(5, rng);
    const auto f = kinked_instance(200 + t, x, 1 + t % 4);
    const Vector s = random_normal_vector(5, rng);
    const double support = f.subdifferential(x).argmax_linear(s).value;
    const double step = 1e-7;
    const double fd = (f.value(x + step * s) - f.value(x)) / step;
    EXPECT_LE(std::abs(support - fd), 1e-5 * std::max(1.0, std::abs(support)));
  }
}

TEST(MaxQuadSubdiff, RejectsIndefinitePiece) {
  Matrix P = Matrix::Identity(2, 2);
  P(1, 1) = -1;
  EXPECT_THROW(MaxQuadSubdiff({QuadraticPiece{P, Vector::Zero(2), 0.0}}), Error);
}
