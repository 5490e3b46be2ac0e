#ifndef TRAV_HARNESS_HPP
#define TRAV_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "trav/config.hpp"
#include "trav/corpus.hpp"
#include "trav/qpdf_model.hpp"
#include "trav/tte.hpp"

namespace trav {

using Policy = std::function<std::optional<FlipperConfig>(const StateVector&)>;

/// Share of states whose chosen configuration is labelled +1. A policy
/// that declines to choose counts as a miss. Throws on an empty set.
double success_rate(const std::vector<AnnotatedState>& states, const Policy& policy);

/// Highest expected q, no safety gate.
Policy argmax_policy(std::shared_ptr<const QpdfModel> model);
/// select_action() with the given gate.
Policy gated_policy(std::shared_ptr<const QpdfModel> model, double epsilon);

struct CurvePoint {
  std::string method;
  double x = 0.0;
  double success_rate = 0.0;  // on the full evaluation set
  double q25 = 0.0;           // quartiles over the seed ensemble
  double q75 = 0.0;
  std::vector<double> per_seed;
};

/// Linear-interpolation quantile of unsorted values.
double quantile(std::vector<double> values, double p);

/// Copy of a fully observed state with the first `count` DEM bins masked
/// in occlude_front() order.
StateVector occlude_state(const StateVector& full, int count, const StateLayout& layout);

struct NamedModel {
  std::string name;
  std::shared_ptr<const QpdfModel> model;
  int step = 1;  // evaluate every step-th occlusion count (the last count is always included)
};

struct SweepParams {
  int ensemble_seeds = 10;  // bootstrap resamples of the evaluation set
  std::uint64_t seed = 0;
  bool gate = false;        // false: pure argmax
  double epsilon = kDefaultEpsilon;
};

/// Success rate against the number of front-occluded bins, reported as a
/// percentage of the grid. Quartiles come from bootstrap resamples of the
/// states that are shared by all methods.
std::vector<CurvePoint> occlusion_sweep(const std::vector<AnnotatedState>& states,
                                        const std::vector<NamedModel>& methods, const StateLayout& layout,
                                        const SweepParams& params);

struct TteMethod {
  std::string name;
  std::shared_ptr<const QpdfModel> model;
  std::function<Strategy(std::uint64_t)> strategy;  // one strategy per ensemble seed
  bool stochastic = false;                          // does the strategy depend on its seed
};

struct TteCurveParams {
  double occlusion_fraction = 0.5;
  int ensemble_seeds = 10;
  std::uint64_t seed = 0;
};

/// Success rate (argmax, no gate) against the number of revealed bins,
/// starting from front occlusion. Exploration runs until every bin is
/// revealed. Each ensemble seed draws a bootstrap resample of the states
/// and seeds the stochastic strategies; success_rate is the ensemble mean.
std::vector<CurvePoint> tte_curve(const std::vector<AnnotatedState>& states, const std::vector<TteMethod>& methods,
                                  const StateLayout& layout, const TteCurveParams& params);

/// `method,x,success_rate,q25,q75` with round-trip decimals.
void write_curves(std::ostream& out, const std::vector<CurvePoint>& points);

/// Every tunable of the experiments, read from a flat config file.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  CorpusParams corpus;
  QLearningParams qlearning;
  double epsilon = kDefaultEpsilon;
  ForestParams forest;
  GpTrainParams gp;
  GibbsParams gibbs;
  bool gibbs_mixture = false;
  int sweep_step = 1;
  int gibbs_sweep_step = 10;
  int ensemble_seeds = 10;
  double tte_occlusion = 0.5;
  int tte_max_states = 0;  // 0 keeps every state
  RlTrainParams rl;

  static ExperimentConfig from_config(const Config& cfg);
};

/// Seeded subset of at most `max_states` states, in their original order.
std::vector<AnnotatedState> subsample_states(const std::vector<AnnotatedState>& states, int max_states,
                                             std::uint64_t seed);

/// Occluded copies of `states` with their ground truth, for RL training.
std::vector<OccludedState> occluded_training_set(const std::vector<AnnotatedState>& states,
                                                 const DemGeometry& geometry, double occlusion_fraction);

/// Fully observed states of the annotated corpus, for fitting the DEM prior.
std::vector<StateVector> corpus_states(const std::vector<AnnotatedState>& states);

/// GP QPDF model with the marginalization used in the experiments: moment
/// matching for SE kernels, Gibbs sampling for RQ kernels.
std::shared_ptr<const GpQpdf> make_gp_qpdf(std::vector<GPModel> models, GmrfPrior prior,
                                           const ExperimentConfig& cfg);

/// Occlusion-sweep methods for whichever models are given: forest-marginal
/// and lsq+forest for a forest, gp-se-uncertain and lsq+gp for an SE GP,
/// gp-rq-gibbs for an RQ GP.
std::vector<NamedModel> occlusion_methods(std::shared_ptr<const ForestQpdf> forest,
                                          std::shared_ptr<const GpQpdf> gp_se,
                                          std::shared_ptr<const GpQpdf> gp_rq, const DemGeometry& geometry,
                                          const ExperimentConfig& cfg);

/// TTE-curve methods: forest+random and forest+rl for a forest (rl only with
/// an exploration forest), gp-se+random and gp-se+ard for an SE GP.
std::vector<TteMethod> tte_methods(std::shared_ptr<const ForestQpdf> forest,
                                   std::shared_ptr<const Forest> exploration,
                                   std::shared_ptr<const GpQpdf> gp_se, const StateLayout& layout);

}  // namespace trav

#endif  // TRAV_HARNESS_HPP
