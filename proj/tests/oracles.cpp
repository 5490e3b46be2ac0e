#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace oracle {

using trav::FlipperConfig;

// ---- toy MDP ---------------------------------------------------------------

ToyMdp random_toy_mdp(std::mt19937_64& rng) {
  ToyMdp m;
  std::uniform_int_distribution<int> nxt(-1, m.n_states - 1);
  std::bernoulli_distribution good(0.6);
  std::uniform_real_distribution<double> pitch(0.0, 1.2);
  for (int s = 0; s < m.n_states; ++s) {
    std::array<int, 2> n{}, l{};
    std::array<double, 2> p{};
    for (int a = 0; a < 2; ++a) {
      n[a] = nxt(rng);
      l[a] = good(rng) ? 1 : -1;
      p[a] = pitch(rng);
    }
    m.next.push_back(n);
    m.label.push_back(l);
    m.pitch.push_back(p);
  }
  return m;
}

double toy_reward(const ToyMdp& mdp, int s, int a, const trav::RewardWeights& w) {
  const double over = std::abs(mdp.pitch[s][a]) - 0.5;
  return w.user * mdp.label[s][a] - w.pitch * (over > 0.0 ? over : 0.0);
}

std::vector<std::array<double, 2>> value_iteration(const ToyMdp& mdp, const trav::RewardWeights& w, double gamma) {
  std::vector<std::array<double, 2>> q(mdp.n_states, {0.0, 0.0});
  for (int it = 0; it < 100000; ++it) {
    auto next = q;
    double change = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < 2; ++a) {
        double v = toy_reward(mdp, s, a, w);
        const int sn = mdp.next[s][a];
        if (sn >= 0) v += gamma * std::max(q[sn][0], q[sn][1]);
        next[s][a] = v;
        change = std::max(change, std::abs(v - q[s][a]));
      }
    }
    q = next;
    if (change == 0.0) break;
  }
  return q;
}

trav::StateVector scalar_state(double v) {
  trav::StateVector x;
  x.values = Vector::Constant(1, v);
  x.missing = trav::Mask::Constant(1, false);
  return x;
}

std::vector<trav::Trajectory> toy_trajectories(const ToyMdp& mdp) {
  std::vector<trav::Trajectory> out;
  int id = 0;
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < 2; ++a) {
      trav::Transition t;
      t.state = scalar_state(s);
      t.action = a == 0 ? FlipperConfig::kIShape : FlipperConfig::kVShape;
      t.user_label = mdp.label[s][a];
      t.pitch = mdp.pitch[s][a];
      t.roughness = 0.0;
      const int sn = mdp.next[s][a];
      t.terminal = sn < 0;
      t.next_state = scalar_state(sn < 0 ? trav::kNaN : sn);
      if (sn < 0) t.next_state.missing.setConstant(true);
      trav::Trajectory traj;
      traj.id = id++;
      traj.transitions.push_back(t);
      out.push_back(traj);
    }
  }
  return out;
}

// ---- forest ------------------------------------------------------------------

namespace {

int grow_random(trav::Tree& tree, std::mt19937_64& rng, int depth, int max_depth, int n_features, int bins) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  std::bernoulli_distribution stop(0.25);
  if (depth >= max_depth || (depth > 0 && stop(rng))) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    trav::TreeLeaf leaf;
    leaf.mass.resize(bins);
    for (int b = 0; b < bins; ++b) leaf.mass[b] = u(rng) < 0.3 ? 0.0 : u(rng);
    if (leaf.mass.sum() == 0.0) leaf.mass[0] = 1.0;
    leaf.mass /= leaf.mass.sum();
    leaf.prior = 0.05 + u(rng);
    tree.nodes[id].leaf = static_cast<int>(tree.leaves.size());
    tree.leaves.push_back(leaf);
    return id;
  }
  std::uniform_int_distribution<int> feat(0, n_features - 1);
  std::uniform_int_distribution<int> thr(-4, 4);
  tree.nodes[id].feature = feat(rng);
  tree.nodes[id].threshold = 0.25 * thr(rng) + 0.125;
  const int left = grow_random(tree, rng, depth + 1, max_depth, n_features, bins);
  const int right = grow_random(tree, rng, depth + 1, max_depth, n_features, bins);
  tree.nodes[id].left = left;
  tree.nodes[id].right = right;
  return id;
}

struct Condition {
  int feature;
  double threshold;
  bool go_left;
};

}  // namespace

trav::Tree random_tree(std::mt19937_64& rng, int max_depth, int n_features, int bins) {
  trav::Tree t;
  grow_random(t, rng, 0, max_depth, n_features, bins);
  return t;
}

Vector enumerate_tree(const trav::Tree& tree, const Vector& x, const trav::Mask& missing) {
  // Collect every leaf with the full list of conditions on its path.
  std::vector<std::pair<int, std::vector<Condition>>> paths;
  std::function<void(int, std::vector<Condition>)> walk = [&](int node, std::vector<Condition> conds) {
    const trav::TreeNode& n = tree.nodes[node];
    if (n.is_leaf()) {
      paths.emplace_back(n.leaf, conds);
      return;
    }
    auto l = conds;
    l.push_back({n.feature, n.threshold, true});
    walk(n.left, l);
    conds.push_back({n.feature, n.threshold, false});
    walk(n.right, conds);
  };
  walk(0, {});

  Vector acc = Vector::Zero(tree.leaves.front().mass.size());
  double total = 0.0;
  for (const auto& [leaf, conds] : paths) {
    bool consistent = true;
    for (const Condition& c : conds) {
      if (missing[c.feature]) continue;
      const bool left = x[c.feature] <= c.threshold;
      if (left != c.go_left) consistent = false;
    }
    if (!consistent) continue;
    acc += tree.leaves[leaf].prior * tree.leaves[leaf].mass;
    total += tree.leaves[leaf].prior;
  }
  return acc / total;
}

Vector enumerate_forest(const trav::Forest& forest, int output, const Vector& x, const trav::Mask& missing) {
  const auto& trees = forest.trees(output);
  Vector acc = Vector::Zero(forest.edges().size() - 1);
  for (const auto& t : trees) acc += enumerate_tree(t, x, missing);
  return acc / static_cast<double>(trees.size());
}

namespace {

double weighted_sse(const std::vector<std::pair<double, double>>& wq) {
  double w = 0.0, s = 0.0;
  for (auto [wi, qi] : wq) {
    w += wi;
    s += wi * qi;
  }
  if (w == 0.0) return 0.0;
  const double mean = s / w;
  double sse = 0.0;
  for (auto [wi, qi] : wq) sse += wi * (qi - mean) * (qi - mean);
  return sse;
}

}  // namespace

std::optional<trav::Split> exhaustive_split(const Matrix& X, const Vector& q,
                                            const std::vector<trav::WeightedSample>& node,
                                            const std::vector<int>& features) {
  std::vector<std::pair<double, double>> all;
  for (const auto& s : node) all.emplace_back(s.weight, q[s.index]);
  const double tol = trav::split_tie_tolerance(weighted_sse(all));

  std::vector<trav::Split> candidates;
  for (int j : features) {
    std::vector<double> values;
    for (const auto& s : node) {
      if (!std::isnan(X(s.index, j))) values.push_back(X(s.index, j));
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      double t = values[k] + 0.5 * (values[k + 1] - values[k]);
      if (!(t < values[k + 1])) t = values[k];
      std::vector<std::pair<double, double>> left, right;
      for (const auto& s : node) {
        const double v = X(s.index, j);
        if (std::isnan(v) || v <= t) left.emplace_back(s.weight, q[s.index]);
        if (std::isnan(v) || v > t) right.emplace_back(s.weight, q[s.index]);
      }
      candidates.push_back({j, t, weighted_sse(left) + weighted_sse(right)});
    }
  }
  if (candidates.empty()) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::min(best, c.objective);
  std::optional<trav::Split> pick;
  for (const auto& c : candidates) {
    if (c.objective > best + tol) continue;
    if (!pick || c.feature < pick->feature || (c.feature == pick->feature && c.threshold < pick->threshold)) {
      pick = c;
    }
  }
  return pick;
}

// ---- GP --------------------------------------------------------------------------

Vector fd_lml_gradient(const Matrix& X, const Vector& y, trav::KernelKind kind, const Vector& theta, double h) {
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector a = theta, b = theta;
    a[i] += h;
    b[i] -= h;
    const double fa = *trav::log_marginal_likelihood(X, y, trav::unpack_log_params(kind, a));
    const double fb = *trav::log_marginal_likelihood(X, y, trav::unpack_log_params(kind, b));
    g[i] = (fa - fb) / (2.0 * h);
  }
  return g;
}

trav::GaussPred dense_predict(const trav::GPModel& model, const Vector& x) {
  const Matrix& X = model.inputs();
  const auto& p = model.kernel();
  const Eigen::Index m = X.rows();
  Matrix K(m, m);
  Vector k(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector xi = X.row(i).transpose();
    k[i] = trav::kernel_eval(p, xi, x);
    for (Eigen::Index j = 0; j < m; ++j) K(i, j) = trav::kernel_eval(p, xi, Vector(X.row(j).transpose()));
  }
  K.diagonal().array() += p.noise_variance + model.jitter();
  const Eigen::FullPivLU<Matrix> lu(K);
  const Vector y = (model.targets().array() - model.mean_offset()).matrix();
  trav::GaussPred g;
  g.mean = model.mean_offset() + k.dot(lu.solve(y));
  g.variance = trav::kernel_eval(p, x, x) - k.dot(lu.solve(k));
  return g;
}

McEstimate mc_uncertain(const trav::GPModel& model, const Vector& mu, const Matrix& cov, int samples,
                        std::uint64_t seed) {
  const Matrix L = cov.llt().matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> means(samples), vars(samples);
  Vector e(mu.size());
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = z(rng);
    const trav::GaussPred g = trav::predict(model, mu + L * e);
    means[s] = g.mean;
    vars[s] = g.variance;
  }
  const double n = samples;
  double m1 = 0.0;
  for (double v : means) m1 += v;
  m1 /= n;
  double var_m = 0.0;
  for (double v : means) var_m += (v - m1) * (v - m1);
  var_m /= n - 1.0;
  std::vector<double> total(samples);
  double t1 = 0.0;
  for (int s = 0; s < samples; ++s) {
    total[s] = vars[s] + (means[s] - m1) * (means[s] - m1) * n / (n - 1.0);
    t1 += total[s];
  }
  t1 /= n;
  double var_t = 0.0;
  for (double v : total) var_t += (v - t1) * (v - t1);
  var_t /= n - 1.0;
  McEstimate out;
  out.mean = m1;
  out.mean_se = std::sqrt(var_m / n);
  out.variance = t1;
  out.variance_se = std::sqrt(var_t / n);
  return out;
}

// ---- policy -------------------------------------------------------------------------

double histogram_mean(const trav::QHistogram& h) {
  double num = 0.0, den = 0.0;
  for (int b = 0; b < h.bins(); ++b) {
    num += h.mass[b] * (h.edges[b] + h.edges[b + 1]) / 2.0;
    den += h.mass[b];
  }
  return num / den;
}

double histogram_safety(const trav::QHistogram& h) {
  double above = 0.0, total = 0.0;
  for (int b = 0; b < h.bins(); ++b) {
    const double lo = h.edges[b], hi = h.edges[b + 1];
    const double overlap = std::max(0.0, hi - std::max(lo, 0.0));
    above += h.mass[b] * overlap / (hi - lo);
    total += h.mass[b];
  }
  return above / total;
}

namespace {

double oracle_safety(const trav::Qpdf& q) {
  if (const auto* h = std::get_if<trav::QHistogram>(&q)) return histogram_safety(*h);
  if (const auto* g = std::get_if<trav::GaussPred>(&q)) {
    if (g->variance == 0.0) return g->mean >= 0.0 ? 1.0 : 0.0;
    // Normal CDF at mean / sd, evaluated on the side that avoids cancellation.
    const double z = g->mean / std::sqrt(g->variance);
    return z >= 0.0 ? 1.0 - 0.5 * std::erfc(z / std::sqrt(2.0)) : 0.5 * std::erfc(-z / std::sqrt(2.0));
  }
  const auto& m = std::get<trav::GaussMixture>(q);
  double s = 0.0;
  for (const auto& g : m.components) s += oracle_safety(trav::Qpdf(g));
  return s / static_cast<double>(m.components.size());
}

double oracle_mean(const trav::Qpdf& q) {
  if (const auto* h = std::get_if<trav::QHistogram>(&q)) return histogram_mean(*h);
  if (const auto* g = std::get_if<trav::GaussPred>(&q)) return g->mean;
  const auto& m = std::get<trav::GaussMixture>(q);
  double s = 0.0;
  for (const auto& g : m.components) s += g.mean;
  return s / static_cast<double>(m.components.size());
}

}  // namespace

std::optional<FlipperConfig> gated_argmax(const trav::PerConfig<trav::Qpdf>& qpdfs, double epsilon) {
  std::optional<int> best;
  double best_mean = 0.0;
  for (int i = 0; i < trav::kNumConfigs; ++i) {
    if (!(oracle_safety(qpdfs[i]) > epsilon)) continue;
    const double m = oracle_mean(qpdfs[i]);
    if (!best || m > best_mean) {
      best = i;
      best_mean = m;
    }
  }
  if (!best) return std::nullopt;
  return trav::config_from_index(*best);
}

trav::PerConfig<trav::Qpdf> random_qpdfs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> nbins(1, 8);
  trav::PerConfig<trav::Qpdf> out;
  for (auto& q : out) {
    switch (kind(rng)) {
      case 0: {
        trav::QHistogram h;
        const int b = nbins(rng);
        const double lo = -2.0 + 2.0 * u(rng);
        h.edges = trav::uniform_edges(lo, lo + 0.5 + 2.0 * u(rng), b, 0.0);
        h.mass.resize(b);
        for (int i = 0; i < b; ++i) h.mass[i] = u(rng) < 0.3 ? 0.0 : u(rng);
        if (h.mass.sum() == 0.0) h.mass[b - 1] = 1.0;
        h.mass /= h.mass.sum();
        q = h;
        break;
      }
      case 1:
        q = trav::GaussPred{2.0 * u(rng) - 1.0, u(rng) < 0.1 ? 0.0 : u(rng)};
        break;
      default: {
        trav::GaussMixture m;
        const int c = 1 + static_cast<int>(3 * u(rng));
        for (int i = 0; i < c; ++i) m.components.push_back({2.0 * u(rng) - 1.0, 0.01 + u(rng)});
        q = m;
        break;
      }
    }
  }
  return out;
}

}  // namespace oracle
