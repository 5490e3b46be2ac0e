#include <gtest/gtest.h>

#include <sstream>

#include "trav/corpus.hpp"
#include "trav/harness.hpp"
#include "trav/qpdf_model.hpp"

using namespace trav;

namespace {

struct Small {
  Corpus corpus;
  std::vector<QSample> samples;
};

const Small& small_corpus() {
  static const Small s = [] {
    CorpusParams p;
    p.replicates = 1;
    p.geometry.rows = 6;
    p.geometry.cols = 3;
    Small out;
    out.corpus = generate_corpus(p, 1);
    out.samples = dataset_q_samples(out.corpus.dataset, QLearningParams{});
    return out;
  }();
  return s;
}

}  // namespace

TEST(QSamples, OnePerTransitionAndSplitByConfig) {
  const Small& s = small_corpus();
  EXPECT_EQ(s.samples.size(), s.corpus.dataset.transition_count());
  const auto parts = split_by_config(s.samples);
  ASSERT_EQ(parts.size(), static_cast<std::size_t>(kNumConfigs));
  std::size_t total = 0;
  for (const auto& p : parts) total += static_cast<std::size_t>(p.X.rows());
  EXPECT_EQ(total, s.samples.size());
  // Forbidden configurations are terminal with a negative reward.
  for (const QSample& q : s.samples) EXPECT_TRUE(std::isfinite(q.q));
}

TEST(ForestQpdf, MeansMatchHistograms) {
  const Small& s = small_corpus();
  ForestParams fp;
  fp.n_trees = 4;
  const ForestQpdf model(train_qpdf_forest(s.samples, fp, 2));
  const StateLayout L = layout_for(s.corpus.geometry);
  const StateVector x = occlude_state(s.corpus.states[3].state, 9, L);
  const auto q = model.qpdfs(x);
  const auto m = model.means(x);
  for (int i = 0; i < kNumConfigs; ++i) EXPECT_NEAR(m[i], expected_q(q[i]), 1e-12);
  EXPECT_EQ(model.name(), "forest-marginal");
}

TEST(LsqQpdf, FillsBeforeAsking) {
  const Small& s = small_corpus();
  ForestParams fp;
  fp.n_trees = 3;
  auto inner = std::make_shared<ForestQpdf>(train_qpdf_forest(s.samples, fp, 3));
  const LsqQpdf lsq(inner, s.corpus.geometry);
  const StateLayout L = layout_for(s.corpus.geometry);
  const StateVector x = occlude_state(s.corpus.states[5].state, 6, L);
  const StateVector filled = lsq.fill(x);
  EXPECT_FALSE(filled.any_missing());
  const auto a = lsq.means(x);
  const auto b = inner->means(filled);
  for (int i = 0; i < kNumConfigs; ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
  EXPECT_EQ(lsq.name(), "lsq+forest-marginal");
}

TEST(GpQpdf, BundleRoundTripAndMarginalization) {
  const Small& s = small_corpus();
  GpTrainParams gp;
  gp.restarts = 1;
  gp.max_iters = 20;
  gp.max_points = 40;
  auto models = train_qpdf_gps(s.samples, KernelKind::kSE, gp, 5);
  ASSERT_EQ(models.size(), static_cast<std::size_t>(kNumConfigs));
  const StateLayout L = layout_for(s.corpus.geometry);
  GmrfPrior prior = fit_gmrf_prior(corpus_states(s.corpus.states), L);

  std::stringstream ss;
  write_gp_bundle(ss, models, prior);
  auto [back, back_prior] = read_gp_bundle(ss);
  ASSERT_EQ(back.size(), models.size());
  EXPECT_EQ(back_prior.anchor_mean, prior.anchor_mean);
  EXPECT_EQ(back_prior.neighbor_precision, prior.neighbor_precision);

  const GpQpdf mm(models, prior, GpMarginalization::kMomentMatching);
  const GpQpdf gibbs(back, back_prior, GpMarginalization::kGibbs, GibbsParams{50, 10}, 3);
  const StateVector full = s.corpus.states[2].state;
  // Nothing missing: both reduce to plain prediction.
  const auto a = mm.qpdfs(full);
  const auto b = gibbs.qpdfs(full);
  for (int i = 0; i < kNumConfigs; ++i) {
    const auto& ga = std::get<GaussPred>(a[i]);
    const auto& gb = std::get<GaussPred>(b[i]);
    EXPECT_NEAR(ga.mean, predict(models[i], full.values).mean, 1e-12);
    EXPECT_NEAR(ga.mean, gb.mean, 1e-9);
  }
  // Partially missing: means path agrees with full QPDFs, results are finite.
  const StateVector x = occlude_state(full, 5, L);
  const auto q = mm.qpdfs(x);
  const auto m = mm.means(x);
  for (int i = 0; i < kNumConfigs; ++i) {
    EXPECT_NEAR(m[i], expected_q(q[i]), 1e-10);
    EXPECT_GT(std::get<GaussPred>(q[i]).variance, 0.0);
  }
  EXPECT_EQ(gibbs.qpdfs(x)[0].index(), 1u);
  const GpQpdf mix(back, back_prior, GpMarginalization::kGibbsMixture, GibbsParams{20, 5}, 3);
  EXPECT_EQ(std::get<GaussMixture>(mix.qpdfs(x)[0]).components.size(), 20u);
}
