#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "trav/gp.hpp"

using namespace trav;

namespace {

struct Problem {
  Matrix X;
  Vector y;
  KernelParams p;
};

Problem random_problem(std::mt19937_64& rng, KernelKind kind, int m, int d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.3, 2.0);
  Problem pr;
  pr.X.resize(m, d);
  pr.y.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) pr.X(i, j) = u(rng);
    pr.y[i] = std::sin(2.0 * pr.X(i, 0)) + 0.1 * u(rng);
  }
  pr.p.kind = kind;
  pr.p.length_scales.resize(d);
  for (int j = 0; j < d; ++j) pr.p.length_scales[j] = pos(rng);
  pr.p.signal_variance = pos(rng);
  pr.p.noise_variance = 0.05 * pos(rng);
  pr.p.rq_alpha = pos(rng);
  return pr;
}

double rel_error(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(b.norm(), 1e-12); }

}  // namespace

TEST(Kernel, TemplatedScalar) {
  KernelParams p;
  p.length_scales = Vector::Constant(2, 0.5);
  p.signal_variance = 2.0;
  Eigen::Vector2f a(0.f, 0.f), b(0.5f, 0.f);
  const float kf = kernel_eval(p, a, b);
  EXPECT_NEAR(kf, 2.0 * std::exp(-0.5), 1e-6);
  Eigen::Matrix<long double, 2, 1> al(0, 0), bl(0.5L, 0);
  EXPECT_NEAR(static_cast<double>(kernel_eval(p, al, bl)), 2.0 * std::exp(-0.5), 1e-15);
  p.kind = KernelKind::kRQ;
  p.rq_alpha = 2.0;
  EXPECT_NEAR(kernel_eval(p, Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 0)), 2.0 * std::pow(1.25, -2.0), 1e-15);
}

TEST(Kernel, ParamsPackRoundTrip) {
  KernelParams p;
  p.kind = KernelKind::kRQ;
  p.length_scales = Vector::LinSpaced(3, 0.5, 1.5);
  p.signal_variance = 1.7;
  p.noise_variance = 0.02;
  p.rq_alpha = 3.0;
  const KernelParams q = unpack_log_params(KernelKind::kRQ, pack_log_params(p));
  EXPECT_NEAR(q.signal_variance, 1.7, 1e-14);
  EXPECT_NEAR(q.rq_alpha, 3.0, 1e-14);
  EXPECT_NEAR((q.length_scales - p.length_scales).norm(), 0.0, 1e-14);
}

TEST(Lml, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (KernelKind kind : {KernelKind::kSE, KernelKind::kRQ}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Problem pr = random_problem(rng, kind, 8, 3);
      Vector g;
      ASSERT_TRUE(log_marginal_likelihood(pr.X, pr.y, pr.p, &g));
      const Vector fd = oracle::fd_lml_gradient(pr.X, pr.y, kind, pack_log_params(pr.p), 1e-5);
      EXPECT_LT(rel_error(g, fd), 1e-5) << to_string(kind) << " trial " << trial;
    }
  }
}

TEST(Lml, MatchesDenseFormula) {
  std::mt19937_64 rng(1);
  const Problem pr = random_problem(rng, KernelKind::kSE, 6, 2);
  Matrix K = kernel_matrix(pr.p, pr.X, pr.X);
  K.diagonal().array() += pr.p.noise_variance;
  const double expected = -0.5 * pr.y.dot(K.fullPivLu().solve(pr.y)) - 0.5 * std::log(K.determinant()) -
                          3.0 * std::log(2.0 * M_PI);
  EXPECT_NEAR(*log_marginal_likelihood(pr.X, pr.y, pr.p), expected, 1e-10);
}

TEST(GpModel, PredictMatchesDenseSolve) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (KernelKind kind : {KernelKind::kSE, KernelKind::kRQ}) {
    const Problem pr = random_problem(rng, kind, 10, 2);
    const GPModel model(pr.X, pr.y.array() + 0.7, pr.p);
    EXPECT_NEAR(model.mean_offset(), pr.y.mean() + 0.7, 1e-14);
    for (int k = 0; k < 5; ++k) {
      const Vector x = Vector::NullaryExpr(2, [&] { return u(rng); });
      const GaussPred got = predict(model, x);
      const GaussPred want = oracle::dense_predict(model, x);
      EXPECT_NEAR(got.mean, want.mean, 1e-9);
      EXPECT_NEAR(got.variance, want.variance, 1e-9);
      EXPECT_NEAR(predict_mean(model, x), got.mean, 1e-12);
    }
  }
}

TEST(GpModel, UncertainWithZeroCovarianceIsPredict) {
  std::mt19937_64 rng(3);
  const Problem pr = random_problem(rng, KernelKind::kSE, 12, 3);
  const GPModel model(pr.X, pr.y, pr.p);
  for (int k = 0; k < 5; ++k) {
    const Vector x = pr.X.row(k).transpose() + Vector::Constant(3, 0.1 * k);
    const GaussPred a = predict_uncertain(model, x, Matrix::Zero(3, 3));
    const GaussPred b = predict(model, x);
    EXPECT_NEAR(a.mean, b.mean, 1e-9);
    EXPECT_NEAR(a.variance, b.variance, 1e-9);
    EXPECT_NEAR(predict_uncertain_mean(model, x, Vector::Zero(3)), b.mean, 1e-9);
  }
}

TEST(GpModel, UncertainMatchesMonteCarlo) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 3; ++trial) {
    const Problem pr = random_problem(rng, KernelKind::kSE, 10, 2);
    const GPModel model(pr.X, pr.y, pr.p);
    Matrix A = Matrix::NullaryExpr(2, 2, [&] { return u(rng); });
    const Matrix cov = A * A.transpose() + 0.01 * Matrix::Identity(2, 2);
    const Vector mu = Vector::NullaryExpr(2, [&] { return u(rng); });
    const GaussPred g = predict_uncertain(model, mu, cov);
    const auto mc = oracle::mc_uncertain(model, mu, cov, 40000, 100 + trial);
    EXPECT_LT(std::abs(g.mean - mc.mean), 4.0 * mc.mean_se);
    EXPECT_LT(std::abs(g.variance - mc.variance), 4.0 * mc.variance_se);
  }
}

TEST(GpModel, DiagonalMeanPathAgreesWithFullPath) {
  std::mt19937_64 rng(5);
  const Problem pr = random_problem(rng, KernelKind::kSE, 15, 4);
  const GPModel model(pr.X, pr.y, pr.p);
  Vector var(4);
  var << 0.0, 0.3, 0.0, 1.2;
  const Vector mu = Vector::LinSpaced(4, -0.3, 0.4);
  EXPECT_NEAR(predict_uncertain_mean(model, mu, var), predict_uncertain(model, mu, var.asDiagonal()).mean, 1e-12);
}

TEST(GpModel, UncertainRejectsRq) {
  std::mt19937_64 rng(6);
  const Problem pr = random_problem(rng, KernelKind::kRQ, 5, 2);
  const GPModel model(pr.X, pr.y, pr.p);
  EXPECT_THROW(predict_uncertain(model, Vector::Zero(2), Matrix::Zero(2, 2)), ParameterError);
}

TEST(GpModel, DuplicateInputsStayFinite) {
  Matrix X(3, 1);
  X << 0.0, 0.0, 1.0;
  Vector q(3);
  q << 1.0, 1.0, 2.0;
  KernelParams p;
  p.length_scales = Vector::Constant(1, 1.0);
  p.noise_variance = 1e-300;
  const GPModel m(X, q, p);
  EXPECT_LE(m.jitter(), 1e-6);
  EXPECT_TRUE(m.weights().allFinite());
  EXPECT_NEAR(predict_mean(m, Vector::Constant(1, 1.0)), 2.0, 1e-4);
}

TEST(TrainGp, FindsRelevantDimensionAndIsDeterministic) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix X(40, 3);
  Vector q(40);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = u(rng);
    q[i] = std::sin(3.0 * X(i, 1));
  }
  GpTrainParams params;
  params.restarts = 2;
  params.max_iters = 100;
  const GPModel a = train_gp(X, q, KernelKind::kSE, params, 11);
  const GPModel b = train_gp(X, q, KernelKind::kSE, params, 11);
  const Vector ard = ard_values(a);
  EXPECT_LT(ard[1], ard[0]);
  EXPECT_LT(ard[1], ard[2]);
  EXPECT_EQ(pack_log_params(a.kernel()), pack_log_params(b.kernel()));
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(predict_mean(a, X.row(i).transpose()), q[i], 0.05);
}

TEST(TrainGp, RespectsPointCap) {
  Matrix X = Matrix::Random(30, 2);
  Vector q = X.col(0);
  GpTrainParams params;
  params.restarts = 1;
  params.max_iters = 5;
  params.max_points = 10;
  EXPECT_EQ(train_gp(X, q, KernelKind::kSE, params, 1).size(), 10);
}

TEST(GpModel, RoundTrip) {
  std::mt19937_64 rng(9);
  const Problem pr = random_problem(rng, KernelKind::kRQ, 7, 2);
  const GPModel a(pr.X, pr.y, pr.p);
  std::stringstream ss;
  write_gp(ss, a);
  const GPModel b = read_gp(ss);
  EXPECT_EQ(b.kernel().kind, KernelKind::kRQ);
  EXPECT_EQ(pack_log_params(a.kernel()), pack_log_params(b.kernel()));
  const Vector x = Vector::Constant(2, 0.2);
  EXPECT_EQ(predict(a, x).mean, predict(b, x).mean);
}
