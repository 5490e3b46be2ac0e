#include "trav/tte.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "trav/text_io.hpp"

namespace trav {

TTEState TTEState::from_state(StateVector state, const StateLayout& layout) {
  if (state.size() != layout.dim() || state.missing.size() != layout.dim()) {
    throw ParameterError("state does not match the layout");
  }
  if (state.missing.head(layout.proprio_dim).any()) {
    throw ParameterError("exploration only reveals DEM bins; proprioceptive features must be observed");
  }
  TTEState s;
  for (int b = 0; b < layout.bins(); ++b) {
    if (state.missing[layout.feature_of_bin(b)]) s.missing_bins.push_back(b);
  }
  s.state = std::move(state);
  return s;
}

void TTEState::reveal(int bin, double height, const StateLayout& layout) {
  auto it = std::lower_bound(missing_bins.begin(), missing_bins.end(), bin);
  if (it == missing_bins.end() || *it != bin) throw ParameterError("bin is not missing");
  if (!std::isfinite(height)) throw ParameterError("revealed height must be finite");
  missing_bins.erase(it);
  const int f = layout.feature_of_bin(bin);
  state.values[f] = height;
  state.missing[f] = false;
  ++step;
}

namespace {

void require_missing(const TTEState& s) {
  if (s.missing_bins.empty()) throw FinalStateError("no missing bins left to explore");
}

}  // namespace

int random_strategy(const TTEState& s, std::uint64_t seed) {
  require_missing(s);
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(s.step)));
  std::uniform_int_distribution<std::size_t> pick(0, s.missing_bins.size() - 1);
  return s.missing_bins[pick(rng)];
}

int ard_strategy(const TTEState& s, const PerConfig<double>& means, const std::vector<Vector>& ard,
                 const StateLayout& layout) {
  require_missing(s);
  if (ard.size() != kNumConfigs) throw ParameterError("need ARD values for every configuration");
  const Vector& lengths = ard[config_index(select_unrestricted(means))];
  if (lengths.size() != layout.dim()) throw ParameterError("ARD values do not match the layout");
  int best = s.missing_bins.front();
  for (int b : s.missing_bins) {
    if (lengths[layout.feature_of_bin(b)] < lengths[layout.feature_of_bin(best)]) best = b;
  }
  return best;
}

int ard_strategy(const TTEState& s, const GpQpdf& model) {
  require_missing(s);
  std::vector<Vector> ard;
  for (const GPModel& m : model.models()) ard.push_back(ard_values(m));
  return ard_strategy(s, model.means(s.state), ard, model.prior().layout);
}

int exploration_feature_count(const StateLayout& layout) { return layout.dim() + layout.bins() + 3; }

Vector exploration_features(const TTEState& s, int bin, const StateLayout& layout) {
  if (bin < 0 || bin >= layout.bins()) throw ParameterError("bin index out of range");
  Vector f(exploration_feature_count(layout));
  const int n = layout.dim();
  for (int j = 0; j < n; ++j) f[j] = s.state.missing[j] ? kMissingSentinel : s.state.values[j];
  for (int b = 0; b < layout.bins(); ++b) f[n + b] = s.state.missing[layout.feature_of_bin(b)] ? 1.0 : 0.0;
  f[n + layout.bins()] = bin / layout.cols;
  f[n + layout.bins() + 1] = bin % layout.cols;
  f[n + layout.bins() + 2] = bin;
  return f;
}

namespace {

double exploration_value(const Forest& forest, const TTEState& s, int bin, const StateLayout& layout,
                         const Mask& none) {
  return forest.predict_mean(0, exploration_features(s, bin, layout), none);
}

}  // namespace

int rl_strategy(const TTEState& s, const Forest& exploration, const StateLayout& layout) {
  require_missing(s);
  const Mask none = Mask::Constant(exploration_feature_count(layout), false);
  int best = -1;
  double best_v = 0.0;
  for (int b : s.missing_bins) {
    const double v = exploration_value(exploration, s, b, layout, none);
    if (best < 0 || v > best_v) {
      best = b;
      best_v = v;
    }
  }
  return best;
}

Strategy make_random_strategy(std::uint64_t seed) {
  return [seed](const TTEState& s) { return random_strategy(s, seed); };
}

Strategy make_ard_strategy(std::shared_ptr<const GpQpdf> model) {
  if (!model) throw ParameterError("ARD strategy needs a GP model");
  return [model](const TTEState& s) { return ard_strategy(s, *model); };
}

Strategy make_rl_strategy(std::shared_ptr<const Forest> exploration, const StateLayout& layout) {
  if (!exploration) throw ParameterError("RL strategy needs an exploration forest");
  return [exploration, layout](const TTEState& s) { return rl_strategy(s, *exploration, layout); };
}

std::vector<int> ExplorationTrace::probed_bins() const {
  std::vector<int> bins;
  for (const ProbeRecord& p : probes) bins.push_back(p.bin);
  return bins;
}

namespace {

void check_ground_truth(const TTEState& s, const DEM& truth, const StateLayout& layout) {
  if (truth.rows() != layout.rows || truth.cols() != layout.cols) {
    throw ParameterError("ground truth does not match the state's grid");
  }
  if (truth.missing_count() != 0 || !truth.heights.allFinite()) {
    throw ParameterError("ground truth must be fully observed");
  }
  for (int b = 0; b < layout.bins(); ++b) {
    const int f = layout.feature_of_bin(b);
    if (!s.state.missing[f] && s.state.values[f] != truth.height(b)) {
      throw ParameterError("ground truth disagrees with an observed bin");
    }
  }
}

std::optional<FlipperConfig> chosen_config(const ActionDecision& d) {
  if (const auto* c = std::get_if<ChosenAction>(&d)) return c->config;
  return std::nullopt;
}

double decision_best_safety(const ActionDecision& d, const PerConfig<Qpdf>& qpdfs) {
  if (const auto* none = std::get_if<NoSafeAction>(&d)) {
    return *std::max_element(none->safety.begin(), none->safety.end());
  }
  return best_safety(qpdfs);
}

}  // namespace

ExplorationTrace explore_until_safe(const TTEState& initial, const DEM& ground_truth, const Strategy& strategy,
                                    const QpdfModel& model, double epsilon, int max_probes) {
  const StateLayout layout = layout_for(ground_truth.geometry);
  check_ground_truth(initial, ground_truth, layout);
  TTEState s = initial;
  const int budget = max_probes < 0 ? static_cast<int>(s.missing_bins.size()) : max_probes;
  ExplorationTrace trace;
  PerConfig<Qpdf> q = model.qpdfs(s.state);
  ActionDecision d = select_action(q, epsilon);
  trace.initial_best_safety = decision_best_safety(d, q);
  while (true) {
    if (auto c = chosen_config(d)) {
      trace.outcome = ExplorationOutcome::kSafeFound;
      trace.config = c;
      break;
    }
    if (s.missing_bins.empty() || trace.n() >= budget) {
      trace.outcome = ExplorationOutcome::kExhausted;
      break;
    }
    const int bin = strategy(s);
    const double h = ground_truth.height(bin);
    s.reveal(bin, h, layout);
    q = model.qpdfs(s.state);
    d = select_action(q, epsilon);
    trace.probes.push_back({bin, h, decision_best_safety(d, q), chosen_config(d)});
  }
  return trace;
}

void write_trace(std::ostream& out, const ExplorationTrace& trace) {
  for (int k = 0; k < trace.n(); ++k) {
    const ProbeRecord& p = trace.probes[k];
    out << k + 1 << ' ' << p.bin << ' ' << io::format_double(p.height) << ' '
        << io::format_double(p.best_safety) << ' ';
    if (p.chosen) {
      out << static_cast<int>(*p.chosen);
    } else {
      out << '-';
    }
    out << '\n';
  }
}

namespace {

struct RlTransition {
  Vector features;
  TTEState next;
  double reward = 0.0;
  bool terminal = false;
  double q = 0.0;
};

}  // namespace

Forest train_rl_strategy(const std::vector<OccludedState>& training, const QpdfModel& model,
                         const RlTrainParams& params, std::uint64_t seed, RlTrainStats* stats) {
  if (training.empty()) throw ParameterError("no occluded training states");
  if (params.episodes < 1 || params.rollouts_per_episode < 1) throw ParameterError("need episodes and rollouts");
  if (params.alpha < 0.0 || params.alpha > 1.0 || params.gamma < 0.0 || params.gamma > 1.0) {
    throw ParameterError("alpha and gamma must lie in [0, 1]");
  }
  if (params.learned_share < 0.0 || params.learned_share > 1.0) {
    throw ParameterError("learned share must lie in [0, 1]");
  }
  const StateLayout layout = layout_for(training.front().ground_truth.geometry);
  std::vector<TTEState> starts;
  for (const OccludedState& o : training) {
    starts.push_back(TTEState::from_state(o.state, layout));
    check_ground_truth(starts.back(), o.ground_truth, layout);
  }
  bool any_missing = false;
  for (const TTEState& s : starts) any_missing = any_missing || !s.missing_bins.empty();
  if (!any_missing) throw ParameterError("no occluded training states");

  const Mask none = Mask::Constant(exploration_feature_count(layout), false);
  std::vector<RlTransition> data;
  std::optional<Forest> forest;
  RlTrainStats local;

  for (int e = 0; e < params.episodes; ++e) {
    const std::size_t first_new = data.size();
    long rollouts_safe = 0;
    for (int r = 0; r < params.rollouts_per_episode; ++r) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(e) + 1, static_cast<std::uint64_t>(r)));
      std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
      const std::size_t si = pick_start(rng);
      const std::uint64_t random_seed = rng();
      std::bernoulli_distribution use_learned(params.learned_share);
      TTEState s = starts[si];
      const DEM& truth = training[si].ground_truth;
      const int budget = params.max_probes < 0 ? static_cast<int>(s.missing_bins.size()) : params.max_probes;
      if (chosen_config(select_action(model.qpdfs(s.state), params.epsilon))) {
        ++rollouts_safe;
        continue;
      }
      const std::size_t rollout_begin = data.size();
      bool safe = false;
      while (!s.missing_bins.empty() && s.step < budget) {
        int bin;
        if (forest && use_learned(rng)) {
          bin = rl_strategy(s, *forest, layout);
          ++local.learned_decisions;
        } else {
          bin = random_strategy(s, random_seed);
        }
        if (forest) ++local.decisions;
        RlTransition t;
        t.features = exploration_features(s, bin, layout);
        s.reveal(bin, truth.height(bin), layout);
        safe = chosen_config(select_action(model.qpdfs(s.state), params.epsilon)).has_value();
        t.next = s;
        data.push_back(std::move(t));
        if (safe) break;
      }
      if (safe) ++rollouts_safe;
      if (data.size() == rollout_begin) continue;
      RlTransition& last = data.back();
      last.terminal = true;
      last.reward = safe ? 1.0 / static_cast<double>(data.size() - rollout_begin) : 0.0;
    }
    local.safe_share.push_back(static_cast<double>(rollouts_safe) / params.rollouts_per_episode);
    for (std::size_t k = first_new; k < data.size(); ++k) {
      data[k].q = data[k].reward;
      if (data[k].terminal) data[k].next = TTEState{};
    }
    if (forest) {
      for (std::size_t k = 0; k < data.size(); ++k) {
        RlTransition& t = data[k];
        double future = 0.0;
        if (!t.terminal && !t.next.missing_bins.empty()) {
          future = -std::numeric_limits<double>::infinity();
          for (int b : t.next.missing_bins) future = std::max(future, exploration_value(*forest, t.next, b, layout, none));
        }
        const double current = forest->predict_mean(0, t.features, none);
        // A transition seen for the first time starts from the model's estimate.
        if (k >= first_new) t.q = current;
        t.q = t.q + params.alpha * (t.reward + params.gamma * future - current);
      }
    }
    if (data.empty()) throw DataError("no exploration decisions were recorded; every start is already safe");
    ForestData fd;
    fd.X.resize(static_cast<Eigen::Index>(data.size()), exploration_feature_count(layout));
    fd.q.resize(static_cast<Eigen::Index>(data.size()));
    for (std::size_t k = 0; k < data.size(); ++k) {
      fd.X.row(static_cast<Eigen::Index>(k)) = data[k].features.transpose();
      fd.q[static_cast<Eigen::Index>(k)] = data[k].q;
    }
    forest = train_forest({fd}, params.forest, derive_seed(seed, 0xf07e57, static_cast<std::uint64_t>(e)));
  }
  local.transitions = static_cast<long>(data.size());
  if (stats) *stats = local;
  return std::move(*forest);
}

}  // namespace trav
