#include "toa_track/analysis.hpp"
#include "toa_track/estimators.hpp"

#include <gtest/gtest.h>

namespace {

using V2 = toa::Vec<2>;

toa::SensorArray<2> reference_array() {
  return toa::validate_sensor_array<2>({V2(0.5, 0.5), V2(0.0, 0.5), V2(0.5, 0.0)});
}

toa::MeasurementFrame frame_for(const toa::SensorArray<2>& s, const V2& x, double sigma = 0.0, std::uint64_t seed = 0) {
  toa::Engine rng(seed);
  return toa::measure(s, x, sigma, rng);
}

TEST(OgdStep, FixedPointAtTruth) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  const auto next = toa::ogd_step(toa::TrackerState<2>{V2(2, 1), 0.1, toa::Method::OGD, 0}, snap);
  EXPECT_LT((next.estimate - V2(2, 1)).norm(), 1e-15);
}

TEST(OgdStep, StepIdentity) {
  const auto s = reference_array();
  toa::Engine rng(21);
  std::uniform_real_distribution<double> box(1.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const toa::LossSnapshot<2> snap(s, frame_for(s, V2(box(rng), box(rng)), 0.01, k));
    const V2 x(box(rng), box(rng));
    const auto next = toa::ogd_step(toa::TrackerState<2>{x, 0.1, toa::Method::OGD, 0}, snap);
    EXPECT_LT((next.estimate - x + 0.1 * toa::loss_gradient(snap, x)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(OgdStep, DescendsNearTruth) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  toa::TrackerState<2> st{V2(2.01, 0.99), 0.1, toa::Method::OGD, 0};
  double f = snap.value(st.estimate);
  for (int k = 0; k < 2; ++k) {
    st = toa::ogd_step(st, snap);
    const double next = snap.value(st.estimate);
    EXPECT_LT(next, f);
    f = next;
  }
}

TEST(OgdStep, RejectsNonPositiveStep) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  EXPECT_THROW(toa::ogd_step(toa::TrackerState<2>{V2(1, 1), 0.0, toa::Method::OGD, 0}, snap), toa::DomainError);
}

TEST(OgdStep, PropagatesAnchorError) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  EXPECT_THROW(toa::ogd_step(toa::TrackerState<2>{V2(0.0, 0.5), 0.1, toa::Method::OGD, 0}, snap),
               toa::AnchorProximityError);
}

TEST(OnmStep, FixedPointAtTruth) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  const auto next = toa::onm_step(toa::TrackerState<2>{V2(2, 1), 0.1, toa::Method::ONM, 0}, snap);
  EXPECT_LT((next.estimate - V2(2, 1)).norm(), 1e-15);
  EXPECT_EQ(next.fallback_count, 0);
}

TEST(OnmStep, QuadraticRegimeLandsOnOracle) {
  const auto s = reference_array();
  const V2 truth(2, 1);
  const toa::LossSnapshot<2> snap(s, frame_for(s, truth));
  const double radius = toa::kappa(toa::ConvexityConfig{}, 3, toa::direction_gram_min_eig(s, truth), 0.0);
  toa::OracleConfig tight;
  tight.gradient_tolerance = 1e-12;
  tight.max_iterations = 100000;
  const V2 near = truth + V2(0.06, -0.04) * radius;
  const V2 oracle = toa::batch_least_squares(snap, near, tight).estimate;
  const auto next = toa::onm_step(toa::TrackerState<2>{near, 0.1, toa::Method::ONM, 0}, snap);
  EXPECT_LT((next.estimate - oracle).norm(), 1e-6);
  EXPECT_EQ(next.fallback_count, 0);

  // from the rim of the ball the error contracts quadratically
  toa::TrackerState<2> st{truth + V2(0.6, -0.8) * radius, 0.1, toa::Method::ONM, 0};
  const double e0 = (st.estimate - oracle).norm();
  st = toa::onm_step(st, snap);
  const double e1 = (st.estimate - oracle).norm();
  st = toa::onm_step(st, snap);
  const double e2 = (st.estimate - oracle).norm();
  EXPECT_LT(e1, 10.0 * e0 * e0);
  EXPECT_LT(e2, 1e-9);
}

TEST(OnmStep, NearSingularHessianFallsBack) {
  const auto s = toa::validate_sensor_array<2>({V2(0, 0), V2(1, 0), V2(2, 1e-9)});
  const V2 target(5, 0);
  const toa::LossSnapshot<2> snap(s, frame_for(s, target));
  const auto next = toa::onm_step(toa::TrackerState<2>{target, 0.1, toa::Method::ONM, 0}, snap);
  EXPECT_EQ(next.fallback_count, 1);
  const V2 expected = target - 0.1 * snap.gradient(target);
  EXPECT_EQ(next.estimate, expected);
}

TEST(OnmStep, TranslationInvariant) {
  const V2 c(-4.0, 2.5);
  const auto s = reference_array();
  const auto shifted = toa::validate_sensor_array<2>({V2(0.5, 0.5) + c, V2(0.0, 0.5) + c, V2(0.5, 0.0) + c});
  const auto f = frame_for(s, V2(2, 1), 0.01, 6);
  const toa::LossSnapshot<2> a(s, f);
  const toa::LossSnapshot<2> b(shifted, f);
  const V2 x(1.9, 1.05);
  const auto na = toa::onm_step(toa::TrackerState<2>{x, 0.1, toa::Method::ONM, 0}, a);
  const auto nb = toa::onm_step(toa::TrackerState<2>{x + c, 0.1, toa::Method::ONM, 0}, b);
  EXPECT_LT((na.estimate + c - nb.estimate).norm(), 1e-12);
}

TEST(TrackerStep, DispatchesOnMethod) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1), 0.01, 2));
  const V2 x(1.95, 1.02);
  EXPECT_EQ(toa::tracker_step(toa::TrackerState<2>{x, 0.1, toa::Method::OGD, 0}, snap).estimate,
            toa::ogd_step(toa::TrackerState<2>{x, 0.1, toa::Method::OGD, 0}, snap).estimate);
  EXPECT_EQ(toa::tracker_step(toa::TrackerState<2>{x, 0.1, toa::Method::ONM, 0}, snap).estimate,
            toa::onm_step(toa::TrackerState<2>{x, 0.1, toa::Method::ONM, 0}, snap).estimate);
}

TEST(OlsInitialize, HandSolvedSystem) {
  const auto s = reference_array();
  const V2 x = toa::ols_initialize(s, frame_for(s, V2(2, 1)));
  EXPECT_NEAR(x[0], 2.0, 1e-14);
  EXPECT_NEAR(x[1], 1.0, 1e-14);
}

TEST(OlsInitialize, ExactAtZeroNoiseForAnyGeometry) {
  toa::Engine rng(31);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3;
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < n + 2; ++i) pts.push_back(Eigen::VectorXd::NullaryExpr(n, [&] { return normal(rng); }));
    const auto s = toa::validate_sensor_array<toa::kDynamic>(pts);
    const Eigen::VectorXd truth = Eigen::VectorXd::NullaryExpr(n, [&] { return 2.0 * normal(rng); });
    toa::Engine unused(0);
    const Eigen::VectorXd x = toa::ols_initialize(s, toa::measure(s, truth, 0.0, unused));
    EXPECT_LT((x - truth).norm(), 1e-10);
  }
}

TEST(OlsInitialize, TranslationShiftsEstimate) {
  const V2 c(10.0, -7.0);
  const auto s = reference_array();
  const auto shifted = toa::validate_sensor_array<2>({V2(0.5, 0.5) + c, V2(0.0, 0.5) + c, V2(0.5, 0.0) + c});
  const auto f = frame_for(s, V2(2, 1), 0.01, 12);
  EXPECT_LT((toa::ols_initialize(s, f) + c - toa::ols_initialize(shifted, f)).norm(), 1e-10);
}

TEST(BatchLeastSquares, ZeroIterationsAtTruth) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  const auto res = toa::batch_least_squares(snap, V2(2, 1), toa::OracleConfig{});
  EXPECT_EQ(res.iterations, 0);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.estimate, V2(2, 1));
}

TEST(BatchLeastSquares, ConvergesFromPerturbedStart) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  const auto res = toa::batch_least_squares(snap, V2(2.05, 0.95), toa::OracleConfig{});
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.gradient_norm, 1e-8);
  EXPECT_LT((res.estimate - V2(2, 1)).norm(), 1e-6);
}

TEST(BatchLeastSquares, IterationCap) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  toa::OracleConfig cfg;
  cfg.max_iterations = 1;
  const auto res = toa::batch_least_squares(snap, V2(2.05, 0.95), cfg);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_FALSE(res.converged);
  EXPECT_GT(res.gradient_norm, cfg.gradient_tolerance);
}

TEST(BatchLeastSquares, AnchorHitIsRecordedNotThrown) {
  const auto s = reference_array();
  const toa::LossSnapshot<2> snap(s, frame_for(s, V2(2, 1)));
  const auto res = toa::batch_least_squares(snap, V2(0.5, 0.5), toa::OracleConfig{});
  ASSERT_TRUE(res.failed_sensor.has_value());
  EXPECT_EQ(*res.failed_sensor, 0);
  EXPECT_FALSE(res.converged);
}

TEST(BatchLeastSquares, ZeroNoiseFromOlsOverBox) {
  const auto s = reference_array();
  toa::Engine rng(77);
  std::uniform_real_distribution<double> box(1.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    const V2 truth(box(rng), box(rng));
    const toa::LossSnapshot<2> snap(s, frame_for(s, truth));
    const auto res = toa::batch_least_squares(snap, toa::ols_initialize(s, snap.frame()), toa::OracleConfig{});
    EXPECT_LT((res.estimate - truth).norm(), 1e-6);
  }
}

TEST(BatchLeastSquares, ContractsAtRho) {
  const auto s = reference_array();
  const V2 truth(2, 1);
  const toa::LossSnapshot<2> snap(s, frame_for(s, truth));
  const double radius = toa::kappa(toa::ConvexityConfig{}, 3, toa::direction_gram_min_eig(s, truth), 0.0);
  toa::Engine rng(4);
  const auto b = toa::estimate_strong_convexity_constants(snap, truth, radius, 500, rng);
  toa::OracleConfig cfg;
  cfg.step_size = 2.0 / (b.mu_hat + b.L_hat);
  cfg.max_iterations = 200;
  const double rho = toa::contraction_factor(*cfg.step_size, b.mu_hat, b.L_hat);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> d;
    toa::batch_least_squares(snap, toa::uniform_in_ball<2>(rng, truth, radius), cfg,
                             [&](int, const V2& p) { d.push_back((p - truth).norm()); });
    for (std::size_t i = 1; i < d.size() && d[i - 1] > 1e-10; ++i) EXPECT_LE(d[i], 1.05 * rho * d[i - 1]);
  }
}

TEST(OracleConfig, Validation) {
  toa::OracleConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.resolved_step(4), 0.25);
  cfg.max_iterations = 0;
  EXPECT_THROW(cfg.validate(), toa::DomainError);
  cfg = {};
  cfg.step_size = -1.0;
  EXPECT_THROW(cfg.validate(), toa::DomainError);
}

}  // namespace
