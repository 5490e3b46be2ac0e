#include "trav/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>

#include "trav/text_io.hpp"

namespace trav {

double pitch_penalty(double pitch) {
  return std::max(0.0, std::abs(pitch) - kPitchPenaltyThreshold);
}

double roughness_penalty(double roughness) {
  return std::max(0.0, roughness - kRoughnessPenaltyThreshold);
}

double reward(FlipperConfig /*config*/, const StateVector& /*state*/, int user_label, double pitch,
              double roughness, const RewardWeights& w) {
  if (user_label != 1 && user_label != -1) throw ParameterError("user label must be +1 or -1");
  if (w.user < 0.0 || w.pitch < 0.0 || w.roughness < 0.0) {
    throw ParameterError("reward weights must be non-negative");
  }
  return w.user * user_label - w.pitch * pitch_penalty(pitch) -
         w.roughness * roughness_penalty(roughness);
}

namespace {

bool same_state(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size() || a.missing.size() != b.missing.size()) return false;
  if ((a.missing != b.missing).any()) return false;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    if (!a.missing[j] && a.values[j] != b.values[j]) return false;
  }
  return true;
}

}  // namespace

Trajectory make_trajectory(int id, std::vector<Transition> transitions) {
  for (std::size_t t = 0; t + 1 < transitions.size(); ++t) {
    if (transitions[t].terminal) {
      throw ParameterError("terminal transition before the end of trajectory " + std::to_string(id));
    }
    if (!same_state(transitions[t].next_state, transitions[t + 1].state)) {
      throw ParameterError("trajectory " + std::to_string(id) + " does not chain at step " +
                           std::to_string(t));
    }
  }
  if (!transitions.empty()) transitions.back().terminal = true;
  return Trajectory{id, std::move(transitions)};
}

std::vector<double> transition_rewards(const std::vector<Trajectory>& trajectories,
                                       const RewardWeights& weights) {
  std::vector<double> r;
  for (const auto& traj : trajectories) {
    for (const auto& tr : traj.transitions) {
      r.push_back(reward(tr.action, tr.state, tr.user_label, tr.pitch, tr.roughness, weights));
    }
  }
  return r;
}

std::vector<double> q_learning_step(const std::vector<Trajectory>& trajectories,
                                    std::span<const double> q_prev, std::span<const double> rewards,
                                    const QFunction& q_function, double alpha, double gamma) {
  std::vector<double> q(q_prev.begin(), q_prev.end());
  std::size_t k = 0;
  for (const auto& traj : trajectories) {
    for (const auto& tr : traj.transitions) {
      double future = 0.0;
      if (!tr.terminal) {
        std::optional<double> best;
        for (int c = 0; c < kNumConfigs; ++c) {
          if (auto v = q_function(config_from_index(c), tr.next_state)) {
            best = best ? std::max(*best, *v) : *v;
          }
        }
        if (!best) throw DataError("Q has no entry for a next state");
        future = *best;
      }
      auto current = q_function(tr.action, tr.state);
      if (!current) throw DataError("Q has no entry for a visited state-action pair");
      q[k] = q_prev[k] + alpha * (rewards[k] + gamma * future - *current);
      ++k;
    }
  }
  return q;
}

std::vector<QSample> q_targets(const std::vector<Trajectory>& trajectories,
                               const QLearningParams& params, const QFitter& fit) {
  if (params.alpha < 0.0 || params.alpha > 1.0) throw ParameterError("alpha must lie in [0, 1]");
  if (params.gamma < 0.0 || params.gamma > 1.0) throw ParameterError("gamma must lie in [0, 1]");
  if (params.iters < 1) throw ParameterError("iters must be >= 1");

  const std::vector<double> rewards = transition_rewards(trajectories, params.weights);
  std::vector<QSample> samples;
  samples.reserve(rewards.size());
  for (const auto& traj : trajectories) {
    for (const auto& tr : traj.transitions) samples.push_back({tr.state, tr.action, 0.0});
  }
  std::vector<double> q = rewards;
  for (int it = 2; it <= params.iters; ++it) {
    for (std::size_t k = 0; k < q.size(); ++k) samples[k].q = q[k];
    const QFunction model = fit(samples);
    std::vector<double> next = q_learning_step(trajectories, q, rewards, model, params.alpha, params.gamma);
    double change = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) change = std::max(change, std::abs(next[k] - q[k]));
    q = std::move(next);
    if (change < params.tolerance) break;
  }
  for (std::size_t k = 0; k < q.size(); ++k) samples[k].q = q[k];
  return samples;
}

TabularQ::Key TabularQ::key_of(FlipperConfig c, const StateVector& x) {
  std::vector<std::uint64_t> bits(static_cast<std::size_t>(x.size()));
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    // All missing entries share one key regardless of the NaN payload.
    bits[j] = x.missing[j] ? ~std::uint64_t{0} : std::bit_cast<std::uint64_t>(x.values[j]);
  }
  return {static_cast<int>(c), std::move(bits)};
}

TabularQ::TabularQ(const std::vector<QSample>& samples) {
  for (const auto& s : samples) {
    Cell& cell = table_[key_of(s.action, s.state)];
    cell.sum += s.q;
    ++cell.count;
  }
}

std::optional<double> TabularQ::find(FlipperConfig c, const StateVector& x) const {
  auto it = table_.find(key_of(c, x));
  if (it == table_.end()) return std::nullopt;
  return it->second.sum / static_cast<double>(it->second.count);
}

double TabularQ::at(FlipperConfig c, const StateVector& x) const {
  auto v = find(c, x);
  if (!v) throw DataError("no tabular Q entry for this state-action pair");
  return *v;
}

QFitter tabular_fitter() {
  return [](const std::vector<QSample>& samples) -> QFunction {
    auto table = std::make_shared<TabularQ>(samples);
    return [table](FlipperConfig c, const StateVector& x) { return table->find(c, x); };
  };
}

std::size_t Dataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.transitions.size();
  return n;
}

namespace {

void write_values(std::ostream& out, const StateVector& s, bool all_nan, int n) {
  for (int j = 0; j < n; ++j) {
    out << ' ';
    if (all_nan || s.missing[j]) {
      out << "NaN";
    } else {
      out << io::format_double(s.values[j]);
    }
  }
}

StateVector read_values(std::istringstream& in, int n) {
  StateVector s;
  s.values.resize(n);
  s.missing.resize(n);
  for (int j = 0; j < n; ++j) {
    s.values[j] = io::read_double(in);
    s.missing[j] = std::isnan(s.values[j]);
  }
  return s;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  const StateLayout layout = data.layout();
  const int n = layout.dim();
  out << "trav-dataset 1 n " << n << " rows " << layout.rows << " cols " << layout.cols
      << " proprio_dim " << layout.proprio_dim << " resolution "
      << io::format_double(data.geometry.resolution) << " vres "
      << io::format_double(data.geometry.vertical_resolution) << '\n';
  for (const auto& traj : data.trajectories) {
    for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
      const Transition& tr = traj.transitions[t];
      if (tr.state.size() != n) throw ParameterError("state length does not match the dataset layout");
      out << traj.id << ' ' << t << ' ' << static_cast<int>(tr.action) << ' ' << tr.user_label << ' '
          << io::format_double(tr.pitch) << ' ' << io::format_double(tr.roughness);
      write_values(out, tr.state, false, n);
      write_values(out, tr.next_state, tr.terminal, n);
      out << '\n';
    }
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file");
  std::istringstream header(line);
  io::expect_token(header, "trav-dataset");
  if (io::read_int(header) != 1) throw DataError("unsupported dataset version");
  io::expect_token(header, "n");
  const int n = static_cast<int>(io::read_int(header));
  Dataset data;
  io::expect_token(header, "rows");
  data.geometry.rows = static_cast<int>(io::read_int(header));
  io::expect_token(header, "cols");
  data.geometry.cols = static_cast<int>(io::read_int(header));
  io::expect_token(header, "proprio_dim");
  if (io::read_int(header) != Proprio::kDim) throw DataError("unsupported proprio_dim");
  io::expect_token(header, "resolution");
  data.geometry.resolution = io::read_double(header);
  io::expect_token(header, "vres");
  data.geometry.vertical_resolution = io::read_double(header);
  if (n != data.layout().dim()) throw DataError("header n does not match grid shape");

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream rec(line);
    const int id = static_cast<int>(io::read_int(rec));
    const long long step = io::read_int(rec);
    Transition tr;
    tr.action = config_from_id(static_cast<int>(io::read_int(rec)));
    tr.user_label = static_cast<int>(io::read_int(rec));
    tr.pitch = io::read_double(rec);
    tr.roughness = io::read_double(rec);
    tr.state = read_values(rec, n);
    tr.next_state = read_values(rec, n);
    tr.terminal = tr.next_state.missing.all();
    if (data.trajectories.empty() || data.trajectories.back().id != id) {
      data.trajectories.push_back(Trajectory{id, {}});
    }
    auto& traj = data.trajectories.back();
    if (step != static_cast<long long>(traj.transitions.size())) {
      throw DataError("dataset records out of order in trajectory " + std::to_string(id));
    }
    traj.transitions.push_back(std::move(tr));
  }
  return data;
}

}  // namespace trav
