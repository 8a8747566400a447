#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "lmpick/ml.hpp"

using namespace lmpick;
using namespace lmpick::ml;

namespace {

std::span<const double> row_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd row(const DesignMatrix& d, Eigen::Index i) { return d.X.row(i).transpose(); }

DesignMatrix gaussian_design(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p) {
  std::normal_distribution<double> g(0.0, 1.0);
  DesignMatrix d;
  d.X.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) d.X(i, j) = g(rng) * (1.0 + 0.5 * static_cast<double>(j % 3)) + static_cast<double>(j);
  d.y = Eigen::VectorXd::Zero(n);
  return d;
}

FitOptions raw_mode() {
  FitOptions o;
  o.standardize = false;
  o.intercept = false;
  return o;
}

}  // namespace

TEST(Ridge, IdentityInterpolation) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Identity(2, 2);
  d.y = Eigen::Vector2d(1, 2);
  RidgeModel m = fit_ridge(d, 0.0, raw_mode());
  EXPECT_DOUBLE_EQ(m.weights(1), 1.0);
  EXPECT_DOUBLE_EQ(m.weights(2), 2.0);
}

TEST(Ridge, ClosedFormSingleColumn) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Ones(2, 1);
  d.y = Eigen::Vector2d(1, 1);
  RidgeModel m = fit_ridge(d, 1.0, raw_mode());
  EXPECT_DOUBLE_EQ(m.weights(1), 2.0 / 3.0);
}

TEST(Ridge, SingularWithoutPenalty) {
  DesignMatrix d;
  d.X.resize(3, 2);
  d.X << 1, 2, 2, 4, 3, 6;
  d.y = Eigen::Vector3d(1, 2, 3);
  try {
    fit_ridge(d, 0.0, raw_mode());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lambda > 0"), std::string::npos);
  }
  EXPECT_NO_THROW(fit_ridge(d, 0.1, raw_mode()));
}

TEST(Ridge, RejectsNonFinite) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Ones(2, 1);
  d.y = Eigen::Vector2d(1, std::nan(""));
  EXPECT_THROW(fit_ridge(d, 1.0), Error);
}

TEST(Ridge, NoiselessRecovery) {
  std::mt19937_64 rng(1);
  DesignMatrix d = gaussian_design(rng, 500, 60);
  for (Eigen::Index i = 0; i < 500; ++i) d.y(i) = 3 * d.X(i, 0) - 2 * d.X(i, 6) + 0.5;
  RidgeModel m = fit_ridge(d, 1e-8);
  Eigen::VectorXd raw = m.raw_coefficients();
  EXPECT_NEAR(raw(0), 0.5, 1e-6);
  for (Eigen::Index j = 0; j < 60; ++j) {
    double truth = j == 0 ? 3.0 : (j == 6 ? -2.0 : 0.0);
    EXPECT_NEAR(raw(j + 1), truth, 1e-6) << j;
  }
  for (Eigen::Index i = 0; i < 500; ++i) EXPECT_NEAR(m.score(row_span(row(d, i))), d.y(i), 1e-4);
}

TEST(Ridge, LambdaZeroMatchesLeastSquares) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.3);
  DesignMatrix d = gaussian_design(rng, 200, 8);
  for (Eigen::Index i = 0; i < 200; ++i) d.y(i) = d.X.row(i).sum() * 0.7 - 3.0 + noise(rng);
  RidgeModel m = fit_ridge(d, 0.0);
  Eigen::MatrixXd A(200, 9);
  A.col(0).setOnes();
  A.rightCols(8) = d.X;
  Eigen::VectorXd ols = A.colPivHouseholderQr().solve(d.y);
  Eigen::VectorXd raw = m.raw_coefficients();
  for (Eigen::Index j = 0; j < 9; ++j) EXPECT_NEAR(raw(j), ols(j), 1e-8) << j;
}

TEST(Ridge, MonotoneShrinkage) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  DesignMatrix d = gaussian_design(rng, 80, 12);
  for (Eigen::Index i = 0; i < 80; ++i) d.y(i) = d.X(i, 2) - 0.5 * d.X(i, 5) + noise(rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 1e-3, 1e-1, 1.0, 10.0, 100.0, 1e4}) {
    RidgeModel m = fit_ridge(d, lambda);
    double norm = m.weights.tail(m.weights.size() - 1).norm();
    EXPECT_LE(norm, prev + 1e-12) << lambda;
    prev = norm;
  }
}

TEST(Ridge, StandardizationRoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 1.0);
  DesignMatrix d = gaussian_design(rng, 60, 5);
  for (Eigen::Index i = 0; i < 60; ++i) d.y(i) = 10 + d.X(i, 1) * 2 + noise(rng);
  RidgeModel m = fit_ridge(d, 0.5);

  DesignMatrix z = d;
  for (Eigen::Index j = 0; j < 5; ++j) z.X.col(j) = (d.X.col(j).array() - m.scaling.mean(j)) / m.scaling.sd(j);
  z.y = (d.y.array() - m.scaling.y_mean) / m.scaling.y_sd;
  FitOptions raw;
  raw.standardize = false;
  RidgeModel r = fit_ridge(z, 0.5, raw);
  for (Eigen::Index i = 0; i < 60; ++i) {
    double via_raw = m.scaling.y_mean + m.scaling.y_sd * r.score(row_span(row(z, i)));
    EXPECT_NEAR(m.score(row_span(row(d, i))), via_raw, 1e-9);
  }
}

TEST(Ridge, ConstantColumnsDropped) {
  std::mt19937_64 rng(5);
  DesignMatrix d = gaussian_design(rng, 30, 4);
  d.X.col(2).setConstant(7.0);
  d.y = d.X.col(0);
  RidgeModel m = fit_ridge(d, 0.01);
  EXPECT_EQ(m.selected, (Mask{0, 1, 3}));
}

TEST(Ridge, PredictClampsAndIntercept) {
  RidgeModel m;
  m.selected = {0};
  m.scaling.mean = Eigen::VectorXd::Zero(1);
  m.scaling.sd = Eigen::VectorXd::Ones(1);
  m.weights = Eigen::Vector2d(5, 0);
  std::vector<double> x{123.0};
  EXPECT_EQ(predict_ridge(m, x), 5.0);
  m.weights = Eigen::Vector2d(-3, 0);
  EXPECT_EQ(m.score(x), -3.0);
  EXPECT_EQ(predict_ridge(m, x), 0.0);
}

TEST(Ridge, GcvPicksFromGrid) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 1.0);
  DesignMatrix d = gaussian_design(rng, 50, 20);
  for (Eigen::Index i = 0; i < 50; ++i) d.y(i) = d.X(i, 0) + noise(rng);
  auto grid = default_lambda_grid();
  ASSERT_EQ(grid.size(), 9u);
  EXPECT_DOUBLE_EQ(grid.front(), 1e-6);
  EXPECT_DOUBLE_EQ(grid.back(), 1e2);
  double l = choose_lambda_gcv(d, all_columns(20));
  EXPECT_NE(std::find(grid.begin(), grid.end(), l), grid.end());
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd Z(40, 4);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    Z(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < 4; ++j) Z(i, j) = g(rng);
    y(i) = g(rng) > 0 ? 1.0 : 0.0;
  }
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd w(4);
    for (Eigen::Index j = 0; j < 4; ++j) w(j) = 2.0 * g(rng);
    Eigen::VectorXd grad = logistic_gradient(Z, y, w, kLogisticPenalty);
    for (Eigen::Index j = 0; j < 4; ++j) {
      double h = 1e-5;
      Eigen::VectorXd a = w, b = w;
      a(j) += h;
      b(j) -= h;
      double fd = (logistic_objective(Z, y, a, kLogisticPenalty) - logistic_objective(Z, y, b, kLogisticPenalty)) / (2 * h);
      EXPECT_LE(std::fabs(fd - grad(j)) / std::max(1.0, std::fabs(grad(j))), 1e-5) << t << "," << j;
    }
  }
}

TEST(Logistic, BalancedMirroredData) {
  // Every point appears with both labels, and so does its mirror image.
  DesignMatrix d;
  std::vector<double> xs{0.5, 1.0, 2.0, 3.5};
  d.X.resize(static_cast<Eigen::Index>(4 * xs.size()), 1);
  d.y.resize(d.X.rows());
  Eigen::Index r = 0;
  for (double x : xs) {
    for (double sx : {x, -x}) {
      for (double label : {0.0, 1.0}) {
        d.X(r, 0) = sx;
        d.y(r++) = label;
      }
    }
  }
  LogisticModel m = fit_logistic(d);
  EXPECT_TRUE(m.converged);
  EXPECT_NEAR(m.weights.norm(), 0.0, 1e-9);
  std::vector<double> x{1.7};
  EXPECT_NEAR(predict_proba(m, x), 0.5, 1e-9);
}

TEST(Logistic, SeparableOneDimensional) {
  DesignMatrix d;
  d.X.resize(6, 1);
  d.X << -3, -2, -1, 1, 2, 3;
  d.y.resize(6);
  d.y << 0, 0, 0, 1, 1, 1;
  LogisticModel m = fit_logistic(d);
  std::vector<double> plus{1.0}, minus{-1.0};
  EXPECT_GT(predict_proba(m, plus), 0.9);
  EXPECT_LT(predict_proba(m, minus), 0.1);
  EXPECT_TRUE(std::isfinite(m.weights(1)));
}

TEST(Logistic, RecoversPlantedWeights) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w1 = 1.2, w2 = -1.6;  // |w| = 2
  DesignMatrix d;
  d.X.resize(2000, 2);
  d.y.resize(2000);
  for (Eigen::Index i = 0; i < 2000; ++i) {
    d.X(i, 0) = g(rng);
    d.X(i, 1) = g(rng);
    double p = 1.0 / (1.0 + std::exp(-(w1 * d.X(i, 0) + w2 * d.X(i, 1))));
    d.y(i) = u(rng) < p ? 1.0 : 0.0;
  }
  LogisticModel m = fit_logistic(d);
  double raw1 = m.weights(1) / m.scaling.sd(0);
  double raw2 = m.weights(2) / m.scaling.sd(1);
  EXPECT_NEAR(raw1, w1, 0.15 * std::fabs(w1));
  EXPECT_NEAR(raw2, w2, 0.15 * std::fabs(w2));
}

TEST(Logistic, ProbabilityBounds) {
  LogisticModel m;
  m.selected = {0};
  m.scaling.mean = Eigen::VectorXd::Zero(1);
  m.scaling.sd = Eigen::VectorXd::Ones(1);
  m.weights = Eigen::Vector2d(0, 0);
  std::vector<double> x{4.0};
  EXPECT_EQ(predict_proba(m, x), 0.5);
  m.weights = Eigen::Vector2d(0.3, 1e6);
  double hi = predict_proba(m, x);
  EXPECT_LT(hi, 1.0);
  EXPECT_GT(hi, 0.999);
  std::vector<double> nx{-4.0};
  EXPECT_GT(predict_proba(m, nx), 0.0);
  m.weights = Eigen::Vector2d(0.3, -0.7);
  double p = predict_proba(m, x);
  m.weights = -m.weights;
  EXPECT_NEAR(p + predict_proba(m, x), 1.0, 1e-15);
}

TEST(Logistic, RejectsNonBinaryLabels) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Ones(2, 1);
  d.y = Eigen::Vector2d(0, 2);
  EXPECT_THROW(fit_logistic(d), Error);
}

TEST(Aic, ClosedFormIdentities) {
  const std::size_t n = 37, k = 4;
  const double rss = 12.5;
  EXPECT_NEAR(aic_linear(2 * rss, n, k) - aic_linear(rss, n, k), n * std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(aic_linear(rss, n, k + 1) - aic_linear(rss, n, k), 2.0);
  EXPECT_EQ(aic_linear(0.0, n, k), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(aic_logistic(-10.0, 3), 28.0);
}

TEST(Aic, LogisticNullModel) {
  DesignMatrix d;
  d.X = Eigen::MatrixXd::Zero(10, 1);
  d.y = Eigen::VectorXd::Zero(10);
  d.y.head(5).setOnes();
  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(1);
  m.scaling.mean = Eigen::VectorXd::Zero(0);
  m.scaling.sd = Eigen::VectorXd::Zero(0);
  EXPECT_NEAR(aic(m, d), -2.0 * 10 * std::log(0.5) + 2.0, 1e-12);
}

TEST(Selection, KeepsSignalDropsNoise) {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> g(0.0, 1.0);
    DesignMatrix d;
    d.X.resize(500, 6);
    d.y.resize(500);
    for (Eigen::Index i = 0; i < 500; ++i) {
      for (Eigen::Index j = 0; j < 6; ++j) d.X(i, j) = g(rng);
      d.y(i) = 2.0 * d.X(i, 0) + 0.5 * g(rng);
    }
    Mask m = select_features(d, ModelKind::Ridge);
    bool has_signal = std::find(m.begin(), m.end(), 0) != m.end();
    if (has_signal && m.size() <= 3) ++successes;
  }
  EXPECT_GT(successes, 10);
}

TEST(Selection, IdenticalCopiesLeaveOne) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  DesignMatrix d;
  d.X.resize(100, 5);
  d.y.resize(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    double v = g(rng);
    d.X.row(i).setConstant(v);
    d.y(i) = v + 0.1 * g(rng);
  }
  EXPECT_EQ(select_features(d, ModelKind::Ridge).size(), 1u);
  for (Eigen::Index i = 0; i < 100; ++i) d.y(i) = d.X(i, 0) + 0.5 * g(rng) > 0 ? 1.0 : 0.0;
  EXPECT_EQ(select_features(d, ModelKind::Logistic).size(), 1u);
}

TEST(Selection, SingleFeature) {
  DesignMatrix d;
  d.X.resize(4, 1);
  d.X << 1, 2, 3, 4;
  d.y = Eigen::Vector4d(1, 2, 2, 5);
  EXPECT_EQ(select_features(d, ModelKind::Ridge), (Mask{0}));
}

TEST(Selection, AicDoesNotIncrease) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(200 + seed);
    std::normal_distribution<double> g(0.0, 1.0);
    DesignMatrix d = gaussian_design(rng, 120, 10);
    for (Eigen::Index i = 0; i < 120; ++i) d.y(i) = d.X(i, 3) - d.X(i, 7) + g(rng);
    SelectionOptions opt;
    Mask all = all_columns(10);
    double before = aic(fit_ridge(d, opt.ridge_lambda, all), d);
    Mask m = select_features(d, ModelKind::Ridge, opt);
    ASSERT_FALSE(m.empty());
    EXPECT_LE(aic(fit_ridge(d, opt.ridge_lambda, m), d), before + 1e-9);
  }
}

TEST(KFold, PartitionAndSizes) {
  auto folds = kfold(100, 10, 1);
  ASSERT_EQ(folds.size(), 10u);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    EXPECT_EQ(f.test.size(), 10u);
    EXPECT_EQ(f.train.size(), 90u);
    for (std::size_t i : f.test) EXPECT_TRUE(seen.insert(i).second);
    for (std::size_t i : f.test) EXPECT_FALSE(std::binary_search(f.train.begin(), f.train.end(), i));
  }
  EXPECT_EQ(seen.size(), 100u);

  auto odd = kfold(103, 10, 1);
  int elevens = 0, tens = 0;
  for (const auto& f : odd) (f.test.size() == 11 ? elevens : tens) += 1;
  EXPECT_EQ(elevens, 3);
  EXPECT_EQ(tens, 7);
}

TEST(KFold, DeterministicAndErrors) {
  auto a = kfold(57, 10, 42), b = kfold(57, 10, 42), c = kfold(57, 10, 43);
  for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(a[f].test, b[f].test);
  bool differs = false;
  for (std::size_t f = 0; f < 10; ++f) differs = differs || a[f].test != c[f].test;
  EXPECT_TRUE(differs);
  EXPECT_THROW(kfold(9, 10, 1), Error);
  EXPECT_THROW(kfold(9, 1, 1), Error);
}
