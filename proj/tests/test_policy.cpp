#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "trav/policy.hpp"

using namespace trav;

namespace {

QHistogram hist(double lo, double hi, std::vector<double> mass) {
  QHistogram h;
  h.edges = uniform_edges(lo, hi, static_cast<int>(mass.size()), 0.0);
  h.mass = Eigen::Map<Vector>(mass.data(), static_cast<Eigen::Index>(mass.size()));
  return h;
}

}  // namespace

TEST(Safety, Axioms) {
  EXPECT_EQ(safety(hist(0.0, 2.0, {0.2, 0.8})), 1.0);
  EXPECT_EQ(safety(hist(0.5, 2.0, {0.5, 0.5})), 1.0);
  EXPECT_EQ(safety(hist(-2.0, 0.0, {0.3, 0.7})), 0.0);
  EXPECT_EQ(safety(hist(-3.0, -1.0, {1.0})), 0.0);
  EXPECT_NEAR(safety(GaussPred{0.0, 2.5}), 0.5, 1e-12);
  EXPECT_EQ(safety(GaussPred{0.3, 0.0}), 1.0);
  EXPECT_EQ(safety(GaussPred{-0.3, 0.0}), 0.0);
  EXPECT_NEAR(safety(GaussMixture{{{0.0, 1.0}, {0.0, 4.0}}}), 0.5, 1e-12);
  // Straddling bin is pro-rated: [-1, 1] with mass 1 gives one half.
  EXPECT_NEAR(safety(hist(-1.0, 1.0, {1.0})), 0.5, 1e-15);
}

TEST(Safety, HistogramMatchesOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    for (const Qpdf& q : oracle::random_qpdfs(rng)) {
      if (const auto* h = std::get_if<QHistogram>(&q)) {
        EXPECT_NEAR(safety(*h), oracle::histogram_safety(*h), 1e-12);
        EXPECT_NEAR(expected_q(*h), oracle::histogram_mean(*h), 1e-12);
      }
    }
  }
}

TEST(SelectAction, ZeroEpsilonIsArgmax) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto q = oracle::random_qpdfs(rng);
    const auto want = oracle::gated_argmax(q, 0.0);
    const ActionDecision got = select_action(q, 0.0);
    if (want) {
      ASSERT_TRUE(std::holds_alternative<ChosenAction>(got)) << i;
      EXPECT_EQ(std::get<ChosenAction>(got).config, *want) << i;
    } else {
      EXPECT_TRUE(std::holds_alternative<NoSafeAction>(got)) << i;
    }
  }
}

TEST(SelectAction, GateMatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> eps(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto q = oracle::random_qpdfs(rng);
    const double e = eps(rng);
    const auto want = oracle::gated_argmax(q, e);
    const ActionDecision got = select_action(q, e);
    ASSERT_EQ(want.has_value(), std::holds_alternative<ChosenAction>(got)) << i;
    if (want) EXPECT_EQ(std::get<ChosenAction>(got).config, *want);
  }
}

TEST(SelectAction, TiesAndNoSafe) {
  PerConfig<Qpdf> q;
  q.fill(GaussPred{1.0, 0.0});
  const auto d = select_action(q, 0.8);
  EXPECT_EQ(std::get<ChosenAction>(d).config, FlipperConfig::kIShape);

  q.fill(GaussPred{0.0, 1.0});
  const auto n = select_action(q, 0.8);
  ASSERT_TRUE(std::holds_alternative<NoSafeAction>(n));
  for (double s : std::get<NoSafeAction>(n).safety) EXPECT_NEAR(s, 0.5, 1e-12);
  EXPECT_NEAR(best_safety(q), 0.5, 1e-12);
  EXPECT_THROW(select_action(q, 1.5), ParameterError);

  PerConfig<double> e{1.0, 3.0, 3.0, -1.0, 0.0};
  EXPECT_EQ(select_unrestricted(e), FlipperConfig::kVShape);
}

TEST(Lsq, ReproducesPlane) {
  DemGeometry g;
  g.rows = 6;
  g.cols = 4;
  DEM dem(g);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 4; ++c) dem.heights(r, c) = 0.3 - 0.05 * r + 0.02 * c;
  }
  DEM occ = occlude_front(dem, 13);
  for (int b = 0; b < 13; ++b) occ.heights(b / 4, b % 4) = kNaN;
  const DEM filled = lsq_interpolate(occ);
  EXPECT_EQ(filled.missing_count(), 0);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(filled.heights(r, c), dem.heights(r, c), 1e-12);
  }
}

TEST(Lsq, NothingObservedIsFlat) {
  DEM dem;
  dem.heights.setConstant(kNaN);
  dem.missing.setConstant(true);
  const DEM filled = lsq_interpolate(dem);
  EXPECT_EQ(filled.heights.cwiseAbs().maxCoeff(), 0.0);
}
