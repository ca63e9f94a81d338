#include <gtest/gtest.h>

#include "convbf/kalman.hpp"
#include "convbf/models.hpp"

using namespace convbf;

namespace {

Matrix s1(double x) { return Matrix::Constant(1, 1, x); }
Vector v1(double x) { return Vector::Constant(1, x); }

Matrix random_spd(Rng& rng, Eigen::Index n, double floor = 0.1) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = standard_normal(rng);
  return symmetrized(a * a.transpose() + floor * Matrix::Identity(n, n));
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix a(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) a(i, j) = standard_normal(rng);
  return a;
}

Vector random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * standard_normal(rng);
  return v;
}

}  // namespace

TEST(KfPredict, IdentityDynamicsWithVanishingNoise) {
  const GaussianBelief b(Vector::Ones(3), 2.0 * Matrix::Identity(3, 3));
  const GaussianBelief p = kf_predict(b, Matrix::Identity(3, 3), 1e-12 * Matrix::Identity(3, 3));
  EXPECT_TRUE(p.mean.isApprox(b.mean, 1e-10));
  EXPECT_LT((p.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KfPredict, ScalarArithmetic) {
  const GaussianBelief p = kf_predict(GaussianBelief(v1(0.0), s1(1.0)), s1(2.0), s1(1.0));
  EXPECT_DOUBLE_EQ(p.covariance(0, 0), 5.0);
}

TEST(KfPredict, WienerMean) {
  const auto m = build_wiener_velocity(MismatchCase::none);
  const GaussianBelief p = kf_predict(GaussianBelief(m.filter_prior()), *m.linear_transition, Matrix::Identity(4, 4));
  Vector expected(4);
  expected << 0.1, 0.1, 1, 1;
  EXPECT_TRUE(p.mean.isApprox(expected, 1e-15));
}

TEST(KfPredict, DimensionMismatchIsInputError) {
  EXPECT_THROW(kf_predict(GaussianBelief(Vector::Zero(2), Matrix::Identity(2, 2)), Matrix::Identity(3, 3),
                          Matrix::Identity(2, 2)),
               InputError);
}

TEST(KfUpdate, ZeroInnovationKeepsMean) {
  const GaussianBelief b(Vector::Constant(2, 0.5), Matrix::Identity(2, 2));
  Matrix c(1, 2);
  c << 1.0, 2.0;
  const GaussianBelief u = kf_update(b, c, s1(1.0), c * b.mean);
  EXPECT_TRUE(u.mean.isApprox(b.mean, 1e-15));
}

TEST(KfUpdate, ScalarHandGain) {
  const GaussianBelief u = kf_update(GaussianBelief(v1(0.0), s1(1.0)), s1(1.0), s1(1.0), v1(2.0));
  EXPECT_NEAR(u.mean(0), 1.0, 1e-15);
  EXPECT_NEAR(u.covariance(0, 0), 0.5, 1e-15);
}

TEST(KfUpdate, HugeMeasurementNoiseLeavesPrior) {
  const GaussianBelief b(Vector::Constant(2, 1.0), Matrix::Identity(2, 2));
  const GaussianBelief u = kf_update(b, Matrix::Identity(2, 2), 1e12 * Matrix::Identity(2, 2), Vector::Constant(2, 50.0));
  EXPECT_LT((u.mean - b.mean).norm(), 1e-6);
  EXPECT_LT((u.covariance - b.covariance).norm(), 1e-6);
}

TEST(KfUpdate, SingularInnovationIsNumericalError) {
  const GaussianBelief b(Vector::Zero(2), Matrix::Identity(2, 2));
  Matrix nan_r = Matrix::Identity(1, 1);
  nan_r(0, 0) = std::nan("");
  EXPECT_THROW(kf_update(b, Matrix::Ones(1, 2), nan_r, v1(0.0)), NumericalError);
  EXPECT_THROW(kf_update(b, Matrix::Zero(1, 2), s1(-1.0), v1(0.0)), NumericalError);
}

TEST(KalmanProperties, PosteriorNeverExceedsPriorInLoewnerOrder) {
  Rng rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index n = 1 + trial % 4, m = 1 + trial % 3;
    const GaussianBelief prior(random_vector(rng, n), random_spd(rng, n));
    const GaussianBelief post =
        kf_update(prior, random_matrix(rng, m, n), random_spd(rng, m), random_vector(rng, m, 3.0));
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(prior.covariance - post.covariance);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(KalmanProperties, JosephFormStaysSymmetricPositiveDefinite) {
  Rng rng(5);
  int checked = 0;
  for (int chain = 0; chain < 100; ++chain) {
    const Eigen::Index n = 2 + chain % 3, m = 1 + chain % 2;
    GaussianBelief b(Vector::Zero(n), random_spd(rng, n));
    const Matrix a = Matrix::Identity(n, n) + 0.1 * random_matrix(rng, n, n);
    const Matrix q = random_spd(rng, n, 0.01) * 0.1;
    const Matrix c = random_matrix(rng, m, n);
    const Matrix r = random_spd(rng, m, 0.01);
    for (int t = 0; t < 100; ++t) {
      b = kf_update(kf_predict(b, a, q), c, r, random_vector(rng, m, 5.0));
      ASSERT_LE(asymmetry(b.covariance), 1e-10);
      ASSERT_TRUE(is_spd(b.covariance));
      ++checked;
    }
  }
  EXPECT_EQ(checked, 10000);
}

TEST(ConvKf, DisabledThresholdsEqualKfBitwise) {
  const auto m = build_wiener_velocity(MismatchCase::case_b_measurement);
  Rng rng(4);
  const Trajectory traj = simulate(m, 40, rng);
  const Matrix& a = *m.linear_transition;
  const Matrix& c = *m.linear_measurement;
  const Matrix q = Matrix::Identity(4, 4), r = Matrix::Identity(2, 2);
  GaussianBelief kf(m.filter_prior()), conv(m.filter_prior());
  for (const auto& y : traj.measurements) {
    kf = kf_update(kf_predict(kf, a, q), c, r, y);
    conv = convkf_step(conv, a, q, c, r, y, ConvConfig{});
    ASSERT_EQ(kf, conv);
  }
}

TEST(ConvKf, EqualsKfWithPreInflatedCovariances) {
  const auto m = build_wiener_velocity(MismatchCase::case_a_transition);
  Rng rng(8);
  const Trajectory traj = simulate(m, 40, rng);
  const Matrix& a = *m.linear_transition;
  const Matrix& c = *m.linear_measurement;
  const Matrix q = Matrix::Identity(4, 4), r = Matrix::Identity(2, 2);
  const ConvConfig cfg{ExponentialThreshold(0.05), ExponentialThreshold(0.005)};
  const Matrix q_eff = q + 1.0 / (2.0 * 0.05) * Matrix::Identity(4, 4);
  const Matrix r_eff = r + 1.0 / (2.0 * 0.005) * Matrix::Identity(2, 2);
  EXPECT_EQ(q_eff, 11.0 * Matrix::Identity(4, 4));
  EXPECT_EQ(r_eff, 101.0 * Matrix::Identity(2, 2));
  GaussianBelief kf(m.filter_prior()), conv(m.filter_prior());
  for (const auto& y : traj.measurements) {
    kf = kf_update(kf_predict(kf, a, q_eff), c, r_eff, y);
    conv = convkf_step(conv, a, q, c, r, y, cfg);
    ASSERT_EQ(kf, conv);
  }
}

TEST(ConvKf, LargeRatesApproachKf) {
  const auto m = build_wiener_velocity(MismatchCase::none);
  Rng rng(12);
  const Trajectory traj = simulate(m, 40, rng);
  const Matrix& a = *m.linear_transition;
  const Matrix& c = *m.linear_measurement;
  const Matrix q = Matrix::Identity(4, 4), r = Matrix::Identity(2, 2);
  const ConvConfig cfg{ExponentialThreshold(1e8), ExponentialThreshold(1e8)};
  GaussianBelief kf(m.filter_prior()), conv(m.filter_prior());
  for (const auto& y : traj.measurements) {
    kf = kf_update(kf_predict(kf, a, q), c, r, y);
    conv = convkf_step(conv, a, q, c, r, y, cfg);
    EXPECT_LT((kf.mean - conv.mean).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(HuberKf, QuadraticRegionEqualsKf) {
  const GaussianBelief prior(Vector::Zero(2), Matrix::Identity(2, 2));
  const Matrix c = Matrix::Identity(2, 2), r = Matrix::Identity(2, 2);
  Vector y(2);
  y << 0.4, -0.3;
  const HuberResult h = huber_kf_update(prior, c, r, y, 1.345);
  const GaussianBelief kf = kf_update(prior, c, r, y);
  EXPECT_TRUE(h.converged);
  EXPECT_LT((h.belief.mean - kf.mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((h.belief.covariance - kf.covariance).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(HuberKf, HugeDeltaEqualsKf) {
  const GaussianBelief prior(Vector::Zero(2), Matrix::Identity(2, 2));
  const Matrix c = Matrix::Identity(2, 2), r = Matrix::Identity(2, 2);
  Vector y(2);
  y << 40.0, -25.0;
  const HuberResult h = huber_kf_update(prior, c, r, y, 1e9);
  const GaussianBelief kf = kf_update(prior, c, r, y);
  EXPECT_LT((h.belief.mean - kf.mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((h.belief.covariance - kf.covariance).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(HuberKf, OutlierInfluenceIsBounded) {
  const GaussianBelief prior(v1(0.0), s1(1.0));
  const GaussianBelief kf = kf_update(prior, s1(1.0), s1(1.0), v1(100.0));
  EXPECT_DOUBLE_EQ(kf.mean(0), 50.0);
  const HuberResult h = huber_kf_update(prior, s1(1.0), s1(1.0), v1(100.0), 1.345);
  EXPECT_TRUE(h.converged);
  EXPECT_LT(std::abs(h.belief.mean(0)), 50.0);
  EXPECT_LT(std::abs(h.belief.mean(0)), 5.0);
}

TEST(HuberKf, NonPositiveDeltaIsInputError) {
  const GaussianBelief prior(v1(0.0), s1(1.0));
  EXPECT_THROW(huber_kf_update(prior, s1(1.0), s1(1.0), v1(1.0), 0.0), InputError);
}
