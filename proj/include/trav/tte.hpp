#ifndef TRAV_TTE_HPP
#define TRAV_TTE_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "trav/dem.hpp"
#include "trav/forest.hpp"
#include "trav/qpdf_model.hpp"

namespace trav {

/// Raised when a strategy is asked for a bin although nothing is missing.
class FinalStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A state under exploration: the AC state plus the set of missing DEM bins.
struct TTEState {
  StateVector state;
  std::vector<int> missing_bins;  // ascending
  int step = 0;                   // probes made so far

  static TTEState from_state(StateVector state, const StateLayout& layout);
  /// Sets the bin's height, clears its mask entry and advances `step`.
  void reveal(int bin, double height, const StateLayout& layout);
};

/// Uniform over the missing bins; the draw depends only on (seed, step).
int random_strategy(const TTEState& s, std::uint64_t seed);

/// Takes the configuration with the highest expected q and returns the
/// missing bin with the smallest length scale in that configuration's
/// model. Ties go to the lowest bin.
int ard_strategy(const TTEState& s, const PerConfig<double>& means, const std::vector<Vector>& ard,
                 const StateLayout& layout);
int ard_strategy(const TTEState& s, const GpQpdf& model);

/// Value used in place of a missing height in exploration features.
inline constexpr double kMissingSentinel = -10.0;

/// Exploration-forest input for probing `bin` in `s`: the state with
/// missing values replaced by the sentinel, the DEM mask as 0/1, then the
/// bin's row, column and index.
Vector exploration_features(const TTEState& s, int bin, const StateLayout& layout);
int exploration_feature_count(const StateLayout& layout);

/// Missing bin with the highest predicted exploration value, ties to the
/// lowest bin.
int rl_strategy(const TTEState& s, const Forest& exploration, const StateLayout& layout);

using Strategy = std::function<int(const TTEState&)>;

Strategy make_random_strategy(std::uint64_t seed);
Strategy make_ard_strategy(std::shared_ptr<const GpQpdf> model);
Strategy make_rl_strategy(std::shared_ptr<const Forest> exploration, const StateLayout& layout);

enum class ExplorationOutcome { kSafeFound, kExhausted };

struct ProbeRecord {
  int bin = -1;
  double height = 0.0;
  double best_safety = 0.0;  // after the reveal
  std::optional<FlipperConfig> chosen;
};

struct ExplorationTrace {
  double initial_best_safety = 0.0;
  std::vector<ProbeRecord> probes;
  ExplorationOutcome outcome = ExplorationOutcome::kExhausted;
  std::optional<FlipperConfig> config;  // set on kSafeFound

  int n() const { return static_cast<int>(probes.size()); }
  std::vector<int> probed_bins() const;
};

/// Reveals bins chosen by `strategy` until select_action() finds a safe
/// configuration or the probe budget (negative: all missing bins) runs
/// out. The ground truth must be fully observed and agree with the
/// observed part of the state.
ExplorationTrace explore_until_safe(const TTEState& initial, const DEM& ground_truth, const Strategy& strategy,
                                    const QpdfModel& model, double epsilon, int max_probes = -1);

/// One line per probe: `step bin height best_safety config` where config is
/// `-` when nothing is safe yet.
void write_trace(std::ostream& out, const ExplorationTrace& trace);

/// An occluded state together with its full ground-truth DEM.
struct OccludedState {
  StateVector state;
  DEM ground_truth;
};

/// Forest settings for the exploration value: the default forest with 24
/// candidate features per split.
inline ForestParams exploration_forest_defaults() {
  ForestParams f;
  f.stopping.features_per_split = 24;
  return f;
}

struct RlTrainParams {
  int episodes = 5;                 // including the initial Random episode
  int rollouts_per_episode = 2000;
  double alpha = 0.5;
  double gamma = 0.8;
  double epsilon = 0.8;             // safety gate ending a rollout
  double learned_share = 0.5;       // DAgger mixing after the first episode
  int max_probes = -1;              // per rollout; negative means no cap
  ForestParams forest = exploration_forest_defaults();
};

struct RlTrainStats {
  long decisions = 0;          // decisions in mixed episodes
  long learned_decisions = 0;  // of which taken by the learned strategy
  long transitions = 0;        // aggregated over all episodes
  std::vector<double> safe_share;  // per episode: rollouts that ended safe
};

/// DAgger-style training of the exploration forest. A rollout that ends
/// safe after n probes earns 1/n on its last step; an exhausted rollout
/// earns nothing. The first episode's targets are the rewards; after every
/// later episode all aggregated q values take one Q-learning step against
/// the previous forest (new transitions start from its estimate) and a new
/// forest is fitted.
Forest train_rl_strategy(const std::vector<OccludedState>& training, const QpdfModel& model,
                         const RlTrainParams& params, std::uint64_t seed, RlTrainStats* stats = nullptr);

}  // namespace trav

#endif  // TRAV_TTE_HPP
