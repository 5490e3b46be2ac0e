#ifndef TRAV_DATASET_HPP
#define TRAV_DATASET_HPP

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "trav/dem.hpp"
#include "trav/types.hpp"

namespace trav {

struct RewardWeights {
  double user = 5.0;
  double pitch = 1.0;
  double roughness = 1.0;
};

// Penalties are zero up to the threshold and grow linearly beyond it.
inline constexpr double kPitchPenaltyThreshold = 0.5;      // rad
inline constexpr double kRoughnessPenaltyThreshold = 2.5;  // m/s^2

double pitch_penalty(double pitch);
double roughness_penalty(double roughness);

/// r = w_user * s - w_pitch * pitch_penalty - w_rough * roughness_penalty.
/// `config` and `state` do not enter the formula; they are part of the
/// signature so that callers can swap in state-dependent rewards.
double reward(FlipperConfig config, const StateVector& state, int user_label, double pitch,
              double roughness, const RewardWeights& weights);

struct Transition {
  StateVector state;
  FlipperConfig action = FlipperConfig::kVShape;
  StateVector next_state;  // ignored when terminal
  int user_label = 1;      // +1 permitted, -1 forbidden
  double pitch = 0.0;
  double roughness = 0.0;
  bool terminal = false;
};

struct Trajectory {
  int id = 0;
  std::vector<Transition> transitions;
};

/// Builds a trajectory, checks chaining, and flags the last transition as
/// terminal.
Trajectory make_trajectory(int id, std::vector<Transition> transitions);

struct QSample {
  StateVector state;
  FlipperConfig action = FlipperConfig::kVShape;
  double q = 0.0;
};

/// Q estimate for (config, state); nullopt where the model has no entry.
/// The max over next-state actions ranges over the configurations that have
/// one, which lets toy problems use fewer than five actions.
using QFunction = std::function<std::optional<double>(FlipperConfig, const StateVector&)>;
using QFitter = std::function<QFunction(const std::vector<QSample>&)>;

struct QLearningParams {
  double alpha = 0.5;
  double gamma = 0.8;
  int iters = 20;
  double tolerance = 1e-4;  // stop once max |q_i - q_{i-1}| drops below this
  RewardWeights weights;
};

/// Rewards of all transitions in trajectory-then-step order.
std::vector<double> transition_rewards(const std::vector<Trajectory>& trajectories,
                                       const RewardWeights& weights);

/// One application of the Q-learning recurrence to every transition:
/// q + alpha * (r + gamma * max_c' Q(c', x') - Q(c, x)), with the max term
/// dropped on terminal transitions.
std::vector<double> q_learning_step(const std::vector<Trajectory>& trajectories,
                                    std::span<const double> q_prev, std::span<const double> rewards,
                                    const QFunction& q_function, double alpha, double gamma);

/// Iterated Q-learning targets. Iteration 1 sets q = r; every further
/// iteration refits Q with `fit` on the previous targets and applies
/// q_learning_step(). Returns the samples of the final iteration.
std::vector<QSample> q_targets(const std::vector<Trajectory>& trajectories,
                               const QLearningParams& params, const QFitter& fit);

/// Exact group-by mean of q over identical (config, state) pairs.
class TabularQ {
 public:
  explicit TabularQ(const std::vector<QSample>& samples);

  std::optional<double> find(FlipperConfig c, const StateVector& x) const;
  /// Throws DataError on an unseen pair.
  double at(FlipperConfig c, const StateVector& x) const;
  std::size_t size() const { return table_.size(); }

 private:
  using Key = std::pair<int, std::vector<std::uint64_t>>;
  static Key key_of(FlipperConfig c, const StateVector& x);

  struct Cell {
    double sum = 0.0;
    long count = 0;
  };
  std::map<Key, Cell> table_;
};

/// QFitter that builds a TabularQ; unseen pairs map to nullopt.
QFitter tabular_fitter();

struct Dataset {
  DemGeometry geometry;
  std::vector<Trajectory> trajectories;

  StateLayout layout() const { return layout_for(geometry); }
  std::size_t transition_count() const;
};

/// Newline-delimited records, one transition per line:
///   trajectory_id step action s pitch roughness x_1..x_n x'_1..x'_n
/// after a header `trav-dataset 1 n N rows R cols C proprio_dim P resolution H vres V`.
/// Missing features are `NaN`; a terminal transition has an all-`NaN` next
/// state.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

}  // namespace trav

#endif  // TRAV_DATASET_HPP
