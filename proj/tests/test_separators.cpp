#include "rescale/analytics.hpp"
#include "rescale/instances.hpp"
#include "rescale/separators.hpp"
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

// Certificate against the original points: max_i <a_i, z> < 0, and the reported margin is that max.
void expect_valid_certificate(const RunTrace& t, const std::vector<Vector>& points) {
  ASSERT_EQ(t.outcome.kind, OutcomeKind::Separated) << t.outcome.detail;
  double worst = -1e300;
  for (const auto& p : points) worst = std::max(worst, p.dot(t.outcome.normal));
  EXPECT_LT(worst, 0.0);
  EXPECT_NEAR(t.outcome.certificate_margin, worst, 1e-12 * (1 + std::abs(worst)));
}

SeparatorConfig quiet(std::int64_t max_iterations = 10000) {
  SeparatorConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.record_metric = false;
  return cfg;
}

}  // namespace

TEST(ShorSeparate, SingletonSeparatesImmediately) {
  const auto t = shor_separate(FiniteSetOracle({vec({1, 0})}));
  EXPECT_EQ(t.iterations(), 1u);
  expect_valid_certificate(t, {vec({1, 0})});
  EXPECT_TRUE(t.outcome.normal.isApprox(vec({-1, 0}), 1e-15));
}

TEST(ShorSeparate, NearFacetSimplexFromEveryStart) {
  const auto q = gen_simplex(1e-3);
  for (std::size_t start = 0; start < q.size(); ++start) {
    auto cfg = quiet(100);
    cfg.start_index = start;
    const auto t = shor_separate(q, cfg);
    EXPECT_LE(t.iterations(), 100u);
    expect_valid_certificate(t, q.points());
  }
}

TEST(ShorSeparate, WellPosedSimplexIsQuick) {
  const auto q = gen_simplex(1.0);
  for (std::size_t start = 0; start < q.size(); ++start) {
    auto cfg = quiet();
    cfg.start_index = start;
    EXPECT_LE(shor_separate(q, cfg).iterations(), 30u);
  }
}

TEST(ShorSeparate, TraceRowsAndMetric) {
  const auto q = gen_simplex(1e-2);
  const auto t = shor_separate(q);
  ASSERT_GT(t.iterations(), 2u);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    EXPECT_EQ(t.rows[k].k, static_cast<std::int64_t>(k));
    // each dilation halves |det V|, so log det (V^T V) drops by 2 ln 2
    EXPECT_NEAR(t.rows[k].log_det, -2.0 * static_cast<double>(k) * std::log(2.0), 1e-9);
  }
}

TEST(ShorSeparate, Deterministic) {
  const auto q = gen_simplex(1e-2);
  const auto a = shor_separate(q);
  const auto b = shor_separate(q);
  ASSERT_EQ(a.iterations(), b.iterations());
  for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_EQ(a.rows[k].cosine, b.rows[k].cosine);
  EXPECT_EQ(a.outcome.normal, b.outcome.normal);
}

TEST(ShorEllipsoid, FailureInstanceCycles) {
  const auto e = failure_instance();
  auto cfg = quiet(1000);
  const auto t = shor_separate_ellipsoid(e.A, e.c, e.start, cfg);
  EXPECT_EQ(t.outcome.kind, OutcomeKind::MaxIterations);
  EXPECT_EQ(t.iterations(), 1000u);
  std::vector<double> cosines;
  for (std::size_t k = 20; k < t.rows.size(); ++k) {
    EXPECT_LE(t.rows[k].cosine, -0.01) << "k=" << k;
    cosines.push_back(t.rows[k].cosine);
  }
  EXPECT_GT(autocorrelation(cosines, 5), 0.99);
  EXPECT_EQ(detect_cycle(cosines).period, 5u);
}

TEST(ShorEllipsoid, NormalizedDataStartSeparates) {
  // v / ||v|| lies outside the basin of the five-cycle.
  const auto e = failure_instance();
  const Vector v = -vec({10, 39});
  const auto t = shor_separate_ellipsoid(e.A, e.c, Vector(v / v.norm()), quiet(1000));
  EXPECT_EQ(t.outcome.kind, OutcomeKind::Separated);
  EXPECT_EQ(t.iterations(), 10u);
}

TEST(ShorEllipsoid, DistantBall) {
  const auto t = shor_separate_ellipsoid(Matrix::Identity(2, 2), vec({3, 0}), vec({1, 0}));
  ASSERT_EQ(t.outcome.kind, OutcomeKind::Separated);
  EXPECT_LE(t.iterations(), 2u);
  const Vector& z = t.outcome.normal;
  EXPECT_LT(z.norm(), vec({3, 0}).dot(z));
}

TEST(ShorEllipsoid, RandomInstancesCertifyOriginalData) {
  for (double d : {1.0, 0.1}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto e = gen_ellipsoid({0, 1, 2, 3, 4}, d, seed);
      const auto t = shor_separate_ellipsoid(e.A, e.c, e.start, quiet());
      ASSERT_EQ(t.outcome.kind, OutcomeKind::Separated) << "seed " << seed;
      const Vector& z = t.outcome.normal;
      EXPECT_LT((e.A.transpose() * z).norm(), e.c.dot(z));
      EXPECT_LT(t.outcome.certificate_margin, 0.0);
    }
  }
}

TEST(ShorEllipsoid, TenDimensionalUnderTwoHundred) {
  std::vector<int> exps(10);
  for (int i = 0; i < 10; ++i) exps[static_cast<std::size_t>(i)] = i;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = gen_ellipsoid(exps, 0.1, seed);
    const auto t = shor_separate_ellipsoid(e.A, e.c, e.start, quiet());
    EXPECT_EQ(t.outcome.kind, OutcomeKind::Separated);
    EXPECT_LT(t.iterations(), 200u);
  }
}

TEST(ShorEllipsoid, RejectsNonUnitStart) {
  EXPECT_THROW(shor_separate_ellipsoid(Matrix::Identity(2, 2), vec({3, 0}), vec({2, 0})), Error);
}

TEST(RandomizedShor, SingletonSeparatesImmediately) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = quiet();
    cfg.seed = seed;
    const auto t = randomized_shor_separate(FiniteSetOracle({vec({1, 0})}), cfg);
    EXPECT_EQ(t.iterations(), 1u);
    expect_valid_certificate(t, {vec({1, 0})});
  }
}

TEST(RandomizedShor, ModerateSimplexAllSeeds) {
  const auto q = gen_simplex(1e-1);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto cfg = quiet(1000);
    cfg.seed = seed;
    expect_valid_certificate(randomized_shor_separate(q, cfg), q.points());
  }
}

TEST(RandomizedShor, SeedChangesPathOnly) {
  const auto q = gen_simplex(1e-2);
  auto cfg = quiet();
  cfg.seed = 1;
  const auto a = randomized_shor_separate(q, cfg);
  const auto b = randomized_shor_separate(q, cfg);
  EXPECT_EQ(a.iterations(), b.iterations());
  EXPECT_EQ(a.outcome.normal, b.outcome.normal);
}

TEST(BfgsSeparate, ShiftedBallSeparatesFirstPass) {
  const BallOracle ball(vec({3, 0}));
  const auto t = bfgs_separate(ball, vec({4, 0}), quiet());
  ASSERT_EQ(t.outcome.kind, OutcomeKind::Separated);
  EXPECT_EQ(t.iterations(), 1u);
  EXPECT_NEAR(t.rows[0].statistic, -8.0, 1e-15);
  EXPECT_TRUE(t.outcome.normal.isApprox(vec({-1, 0}), 1e-15));
}

TEST(BfgsSeparate, UnitBallStepVanishes) {
  Rng rng(1);
  const auto t = bfgs_separate(BallOracle::unit(3), random_unit_vector(3, rng), SpdMatrix(vec({1, 2, 3}).asDiagonal()),
                               quiet());
  EXPECT_EQ(t.outcome.kind, OutcomeKind::StepVanished);
}

TEST(BfgsSeparate, OriginSingletonCertifiesMembership) {
  const auto t = bfgs_separate(FiniteSetOracle({vec({0, 0})}), vec({0, 0}), quiet());
  EXPECT_EQ(t.outcome.kind, OutcomeKind::MembershipCertified);
  EXPECT_EQ(t.iterations(), 1u);
}

TEST(BfgsHull, AxisPairSeparates) {
  const std::vector<Vector> pts = {vec({1, 0}), vec({0, 1})};
  expect_valid_certificate(bfgs_separate_hull(FiniteSetOracle(pts)), pts);
}

TEST(BfgsHull, SimplexSweepSlowerThanShorWhenIllPosed) {
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const auto q = gen_simplex(eps);
    double bfgs_total = 0;
    double shor_total = 0;
    for (std::size_t start = 0; start < q.size(); ++start) {
      auto cfg = quiet(200000);
      cfg.start_index = start;
      const auto b = bfgs_separate_hull(q, cfg);
      expect_valid_certificate(b, q.points());
      bfgs_total += static_cast<double>(b.iterations());
      shor_total += static_cast<double>(shor_separate(q, cfg).iterations());
    }
    if (eps < 0.05) {
      EXPECT_GT(bfgs_total, shor_total) << "eps " << eps;
    }
  }
}

TEST(BfgsHull, SymmetricSetHalvesDeterminant) {
  const FiniteSetOracle q({vec({1, 0}), vec({-1, 0}), vec({0, 1}), vec({0, -1})});
  SeparatorConfig cfg;
  cfg.max_iterations = 40;
  const auto t = bfgs_separate_hull(q, cfg);
  EXPECT_NE(t.outcome.kind, OutcomeKind::Separated);
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    EXPECT_LE(t.rows[k].log_det, t.rows[k - 1].log_det - std::log(2.0) + 1e-10);
    EXPECT_LE(t.rows[k].log_det, -static_cast<double>(k) * std::log(2.0) + 1e-9);
  }
}

TEST(BfgsHull, DeterminantRatioAlongTrace) {
  for (double eps : {1e-1, 1e-2}) {
    const auto q = gen_simplex(eps);
    SeparatorConfig cfg;
    cfg.record_path = true;
    const auto t = bfgs_separate_hull(q, cfg);
    ASSERT_EQ(t.path.size(), t.rows.size());
    // replay H from the recorded g sequence and compare log det increments
    Matrix H = Matrix::Identity(q.dimension(), q.dimension());
    for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
      const Vector& g = t.path[k];
      const Vector& g_plus = t.path[k + 1];
      const Vector s = -(H * g);
      const double predicted = std::log(-s.dot(g) / s.dot(g_plus - g));
      EXPECT_NEAR(t.rows[k + 1].log_det - t.rows[k].log_det, predicted, 1e-8 * (1 + std::abs(predicted))) << k;
      H = bfgs_update(SpdMatrix::trusted(H), g, g_plus).matrix();
    }
  }
}

TEST(EllipsoidSeparate, SinglePointTwoPasses) {
  const auto t = ellipsoid_separate(FiniteSetOracle({vec({1, 0})}));
  EXPECT_EQ(t.iterations(), 2u);
  expect_valid_certificate(t, {vec({1, 0})});
}

TEST(EllipsoidSeparate, FirstCutIsLowestIndexPoint) {
  SeparatorConfig cfg;
  cfg.max_iterations = 2;
  cfg.record_path = true;
  const auto t = ellipsoid_separate(FiniteSetOracle({vec({0, 2}), vec({3, 0})}), cfg);
  ASSERT_EQ(t.path.size(), 2u);
  // x moves against the first cut g = (0, 2)
  EXPECT_NEAR(t.path[1](0), 0.0, 1e-15);
  EXPECT_NEAR(t.path[1](1), -1.0 / 3.0, 1e-15);
}

TEST(EllipsoidSeparate, SimplexTerminates) {
  const auto q = gen_simplex(1e-1);
  expect_valid_certificate(ellipsoid_separate(q), q.points());
}

TEST(CholeskyBfgs, AxisPairMatchesHull) {
  const std::vector<Vector> pts = {vec({1, 0}), vec({0, 1})};
  const auto c = cholesky_bfgs_separate(pts);
  expect_valid_certificate(c, pts);
  EXPECT_EQ(c.iterations(), bfgs_separate_hull(FiniteSetOracle(pts)).iterations());
}

TEST(CholeskyBfgs, SimplexMatchesHull) {
  const auto q = gen_simplex(1e-1);
  for (std::size_t start = 0; start < q.size(); ++start) {
    auto cfg = quiet();
    cfg.start_index = start;
    const auto c = cholesky_bfgs_separate(q.points(), cfg);
    expect_valid_certificate(c, q.points());
    const auto h = bfgs_separate_hull(q, cfg);
    EXPECT_LE(std::abs(static_cast<long>(c.iterations()) - static_cast<long>(h.iterations())), 1);
  }
}

TEST(CholeskyBfgs, RandomSmallInstancesMatchHull) {
  Rng rng(21);
  int compared = 0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + t % 3;
    const std::size_t m = 2 + static_cast<std::size_t>(t) % 5;
    const Vector shift = 0.5 * random_normal_vector(n, rng);
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < m; ++i) pts.push_back(random_normal_vector(n, rng) + shift);
    const auto c = cholesky_bfgs_separate(pts, quiet(2000));
    const auto h = bfgs_separate_hull(FiniteSetOracle(pts), quiet(2000));
    EXPECT_EQ(c.iterations(), h.iterations()) << "instance " << t;
    if (c.outcome.separated()) expect_valid_certificate(c, pts);
    ++compared;
  }
  EXPECT_EQ(compared, 50);
}

TEST(CholeskyBfgs, TwoPointsMatchSegment) {
  const Vector c = vec({1, 0.2});
  const Vector d = vec({-0.7, 0.5});
  const auto a = cholesky_bfgs_separate({c, d});
  const auto b = segment_separate(c, d);
  ASSERT_EQ(a.iterations(), b.iterations());
  for (std::size_t k = 0; k < a.rows.size(); ++k)
    EXPECT_NEAR(a.rows[k].statistic, b.rows[k].statistic, 1e-12 * (1 + std::abs(b.rows[k].statistic)));
}

TEST(SegmentSeparate, AxisPair) {
  const auto t = segment_separate(vec({1, 0}), vec({0, 1}));
  EXPECT_EQ(t.outcome.kind, OutcomeKind::Separated);
  EXPECT_EQ(t.iterations(), 2u);
  EXPECT_NEAR(t.rows[0].gamma, 0.5, 1e-15);
  EXPECT_NEAR(segment_iteration_bound(vec({1, 0}), vec({0, 1})), 4.0, 1e-15);
  expect_valid_certificate(t, {vec({1, 0}), vec({0, 1})});
}

TEST(SegmentSeparate, BarelyMissingOrigin) {
  const Vector c = vec({1, 0});
  const Vector d = vec({-1, 1e-3});
  const auto t = segment_separate(c, d, quiet(1000000));
  ASSERT_EQ(t.outcome.kind, OutcomeKind::Separated);
  EXPECT_LE(static_cast<double>(t.iterations()), std::ceil(segment_iteration_bound(c, d)));
  for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
    const double g = t.rows[k].gamma;
    EXPECT_GE(t.rows[k + 1].gamma, g + g * g * g - 1e-12);
  }
}

TEST(SegmentSeparate, OriginInsideNeverSeparates) {
  const auto t = segment_separate(vec({1, 0}), vec({-1, 0}), quiet(100));
  EXPECT_FALSE(t.outcome.separated());
}

TEST(SegmentSeparate, GammaIsScaleAndRotationInvariant) {
  const Vector c = vec({1.3, -0.2});
  const Vector d = vec({-0.4, 0.9});
  const double th = 0.7;
  Matrix R(2, 2);
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  EXPECT_NEAR(segment_gamma(c, d), segment_gamma(Vector(5.0 * R * c), Vector(5.0 * R * d)), 1e-14);
}

TEST(UnitBall, IdentityStartHalvesStep) {
  Rng rng(2);
  const Vector g = random_unit_vector(4, rng);
  SeparatorConfig cfg;
  cfg.max_iterations = 3;
  const auto t = unit_ball_iteration(g, SpdMatrix::identity(4), cfg);
  ASSERT_GE(t.rows.size(), 2u);
  EXPECT_NEAR(t.rows[0].step_norm, 1.0, 1e-15);
  EXPECT_NEAR(t.rows[1].step_norm, 0.5, 1e-15);
  EXPECT_NEAR(t.rows[1].log_det, -std::log(2.0), 1e-14);
}

TEST(UnitBall, DeterminantHalvesAndLargestEigenvalueShrinks) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto u = gen_unit_ball(5, seed);
    SeparatorConfig cfg;
    cfg.max_iterations = 100;
    const auto t = unit_ball_iteration(u.g0, u.H0, cfg);
    for (std::size_t k = 1; k < t.rows.size(); ++k) {
      EXPECT_LE(t.rows[k].log_det, t.rows[k - 1].log_det - std::log(2.0) + 1e-10);
      EXPECT_LE(t.rows[k].lambda_max, t.rows[k - 1].lambda_max * (1 + 1e-10));
    }
  }
}

TEST(UnitBall, StepShrinksByEightOrders) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto u = gen_unit_ball(5, seed);
    SeparatorConfig cfg;
    cfg.max_iterations = 500;
    cfg.relative_step_tol = 1e-8;
    const auto t = unit_ball_iteration(u.g0, u.H0, cfg);
    EXPECT_EQ(t.outcome.kind, OutcomeKind::StepVanished);
    EXPECT_TRUE(first_step_reduced(t, 1e-8).has_value());
  }
}

TEST(SeparatorConfig, Validation) {
  SeparatorConfig cfg;
  cfg.dilation_beta = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.max_iterations = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.step_tol = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

// Empirical envelope: 99% of runs reduce ||s|| by 1e-8 within 10 n passes.
TEST(UnitBall, ReductionWithinTenNIterations) {
  for (Index n : {2, 4, 8, 16, 32, 64}) {
    int reached = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto u = gen_unit_ball(n, seed);
      SeparatorConfig cfg;
      cfg.max_iterations = 10 * n + 1;
      cfg.step_tol = std::numeric_limits<double>::min();
      cfg.relative_step_tol = 1e-8;
      cfg.record_metric = false;
      const auto t = unit_ball_iteration(u.g0, u.H0, cfg);
      const auto k = first_step_reduced(t, 1e-8);
      reached += k && static_cast<Index>(*k) <= 10 * n;
    }
    EXPECT_GE(reached, 198) << "n = " << n;
  }
}
