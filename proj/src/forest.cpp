#include "trav/forest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "trav/text_io.hpp"

namespace trav {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

double split_tie_tolerance(double node_sse) { return 1e-9 * (1.0 + node_sse); }

namespace {

struct Observed {
  double value;
  double weight;
  double dq;  // q minus the node mean
};

}  // namespace

std::optional<Split> best_split(const Matrix& X, const Vector& q, std::span<const WeightedSample> node,
                                std::span<const int> features) {
  double w_total = 0.0, s_total = 0.0;
  for (const auto& s : node) {
    w_total += s.weight;
    s_total += s.weight * q[s.index];
  }
  if (node.size() < 2 || !(w_total > 0.0)) return std::nullopt;
  const double mean = s_total / w_total;
  double node_sse = 0.0;
  for (const auto& s : node) node_sse += s.weight * (q[s.index] - mean) * (q[s.index] - mean);
  const double tol = split_tie_tolerance(node_sse);

  std::optional<Split> best;
  std::vector<Observed> obs;
  obs.reserve(node.size());
  for (int j : features) {
    obs.clear();
    double wm = 0.0, sm = 0.0, qm = 0.0;
    for (const auto& s : node) {
      const double v = X(s.index, j);
      const double dq = q[s.index] - mean;
      if (std::isnan(v)) {
        wm += s.weight;
        sm += s.weight * dq;
        qm += s.weight * dq * dq;
      } else {
        obs.push_back({v, s.weight, dq});
      }
    }
    if (obs.size() < 2) continue;
    std::sort(obs.begin(), obs.end(), [](const Observed& a, const Observed& b) { return a.value < b.value; });
    if (obs.front().value == obs.back().value) continue;

    double wo = 0.0, so = 0.0, qo = 0.0;
    for (const auto& o : obs) {
      wo += o.weight;
      so += o.weight * o.dq;
      qo += o.weight * o.dq * o.dq;
    }
    double wl = 0.0, sl = 0.0, ql = 0.0;
    for (std::size_t k = 0; k + 1 < obs.size(); ++k) {
      wl += obs[k].weight;
      sl += obs[k].weight * obs[k].dq;
      ql += obs[k].weight * obs[k].dq * obs[k].dq;
      if (obs[k].value == obs[k + 1].value) continue;
      const double w1 = wl + wm, s1 = sl + sm, q1 = ql + qm;
      const double w2 = (wo - wl) + wm, s2 = (so - sl) + sm, q2 = (qo - ql) + qm;
      const double sse1 = std::max(0.0, q1 - s1 * s1 / w1);
      const double sse2 = std::max(0.0, q2 - s2 * s2 / w2);
      const double objective = sse1 + sse2;
      if (!best || objective < best->objective - tol) {
        double threshold = obs[k].value + 0.5 * (obs[k + 1].value - obs[k].value);
        if (!(threshold < obs[k + 1].value)) threshold = obs[k].value;
        best = Split{j, threshold, objective};
      }
    }
  }
  return best;
}

std::optional<Split> best_split(const Matrix& X, const Vector& q) {
  std::vector<WeightedSample> node(static_cast<std::size_t>(X.rows()));
  for (int i = 0; i < X.rows(); ++i) node[i] = {i, 1.0};
  std::vector<int> features(static_cast<std::size_t>(X.cols()));
  std::iota(features.begin(), features.end(), 0);
  return best_split(X, q, node, features);
}

std::vector<std::pair<int, double>> Tree::reached_leaves(const Eigen::Ref<const Vector>& x,
                                                         const Mask& missing) const {
  std::vector<std::pair<int, double>> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const TreeNode& n = nodes[stack.back()];
    stack.pop_back();
    if (n.is_leaf()) {
      out.emplace_back(n.leaf, leaves[n.leaf].prior);
      continue;
    }
    if (missing[n.feature]) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(x[n.feature] <= n.threshold ? n.left : n.right);
    }
  }
  return out;
}

int Tree::depth() const {
  std::function<int(int)> rec = [&](int i) -> int {
    const TreeNode& n = nodes[i];
    return n.is_leaf() ? 0 : 1 + std::max(rec(n.left), rec(n.right));
  };
  return nodes.empty() ? 0 : rec(0);
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Vector& q, const Vector& edges, const StoppingParams& stopping,
              std::uint64_t seed)
      : X_(X), q_(q), edges_(edges), stopping_(stopping), rng_(seed) {
    all_features_.resize(static_cast<std::size_t>(X.cols()));
    std::iota(all_features_.begin(), all_features_.end(), 0);
  }

  Tree build(std::vector<WeightedSample> root) {
    total_weight_ = 0.0;
    for (const auto& s : root) total_weight_ += s.weight;
    grow(std::move(root), 0);
    return std::move(tree_);
  }

 private:
  std::vector<int> draw_features() {
    const int n = static_cast<int>(all_features_.size());
    const int k = stopping_.features_per_split;
    if (k <= 0 || k >= n) return all_features_;
    std::vector<int> pool = all_features_;
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(pool[i], pool[pick(rng_)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  bool pure(const std::vector<WeightedSample>& node) const {
    for (const auto& s : node) {
      if (q_[s.index] != q_[node.front().index]) return false;
    }
    return true;
  }

  int grow(std::vector<WeightedSample> node, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::optional<Split> split;
    if (static_cast<int>(node.size()) > stopping_.min_samples && depth < stopping_.max_depth && !pure(node)) {
      const std::vector<int> features = draw_features();
      split = best_split(X_, q_, node, features);
      if (!split && features.size() != all_features_.size()) {
        split = best_split(X_, q_, node, all_features_);
      }
    }

    if (!split) {
      std::vector<double> qs, ws;
      qs.reserve(node.size());
      ws.reserve(node.size());
      double w = 0.0;
      for (const auto& s : node) {
        qs.push_back(q_[s.index]);
        ws.push_back(s.weight);
        w += s.weight;
      }
      TreeLeaf leaf{histogram_of(edges_, qs, ws).mass, w / total_weight_};
      tree_.nodes[id].leaf = static_cast<int>(tree_.leaves.size());
      tree_.leaves.push_back(std::move(leaf));
      return id;
    }

    std::vector<WeightedSample> left, right;
    for (const auto& s : node) {
      const double v = X_(s.index, split->feature);
      if (std::isnan(v)) {
        left.push_back({s.index, 0.5 * s.weight});
        right.push_back({s.index, 0.5 * s.weight});
      } else if (v <= split->threshold) {
        left.push_back(s);
      } else {
        right.push_back(s);
      }
    }
    node.clear();
    node.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& n = tree_.nodes[id];
    n.feature = split->feature;
    n.threshold = split->threshold;
    n.left = l;
    n.right = r;
    return id;
  }

  const Matrix& X_;
  const Vector& q_;
  const Vector& edges_;
  StoppingParams stopping_;
  std::mt19937_64 rng_;
  std::vector<int> all_features_;
  double total_weight_ = 0.0;
  Tree tree_;
};

}  // namespace

Tree train_tree(const Matrix& X, const Vector& q, std::span<const int> samples, const Vector& edges,
                const StoppingParams& stopping, std::uint64_t seed) {
  if (samples.empty()) throw ParameterError("cannot train a tree without samples");
  if (X.rows() != q.size()) throw ParameterError("X and q disagree on the sample count");
  std::vector<WeightedSample> root;
  root.reserve(samples.size());
  for (int i : samples) root.push_back({i, 1.0});
  return TreeBuilder(X, q, edges, stopping, seed).build(std::move(root));
}

Tree train_tree(const Matrix& X, const Vector& q, const Vector& edges, const StoppingParams& stopping,
                std::uint64_t seed) {
  std::vector<int> all(static_cast<std::size_t>(X.rows()));
  std::iota(all.begin(), all.end(), 0);
  return train_tree(X, q, all, edges, stopping, seed);
}

Forest::Forest(Vector edges, int n_features, std::vector<std::vector<Tree>> trees)
    : edges_(std::move(edges)), n_features_(n_features), trees_(std::move(trees)) {
  if (trees_.empty()) throw ParameterError("forest needs at least one output");
  for (const auto& t : trees_) {
    if (t.empty()) throw ParameterError("every forest output needs at least one tree");
  }
}

QHistogram Forest::predict(int output, const Eigen::Ref<const Vector>& x, const Mask& missing) const {
  const auto& trees = trees_.at(output);
  Vector acc = Vector::Zero(edges_.size() - 1);
  for (const Tree& tree : trees) {
    const auto reached = tree.reached_leaves(x, missing);
    double wsum = 0.0;
    for (const auto& [leaf, prior] : reached) wsum += prior;
    for (const auto& [leaf, prior] : reached) acc += (prior / wsum) * tree.leaves[leaf].mass;
  }
  QHistogram h{edges_, acc / static_cast<double>(trees.size())};
  h.normalize();
  return h;
}

double Forest::predict_mean(int output, const Eigen::Ref<const Vector>& x, const Mask& missing) const {
  const Eigen::Index bins = edges_.size() - 1;
  const Vector centers = 0.5 * (edges_.head(bins) + edges_.tail(bins));
  const auto& trees = trees_.at(output);
  double total = 0.0;
  for (const Tree& tree : trees) {
    const auto reached = tree.reached_leaves(x, missing);
    double wsum = 0.0, acc = 0.0;
    for (const auto& [leaf, prior] : reached) {
      wsum += prior;
      acc += prior * tree.leaves[leaf].mass.dot(centers) / tree.leaves[leaf].mass.sum();
    }
    total += acc / wsum;
  }
  return total / static_cast<double>(trees.size());
}

bool operator==(const Forest& a, const Forest& b) {
  if (a.n_features_ != b.n_features_ || a.edges_.size() != b.edges_.size() || a.edges_ != b.edges_ ||
      a.trees_.size() != b.trees_.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.trees_.size(); ++k) {
    if (a.trees_[k].size() != b.trees_[k].size()) return false;
    for (std::size_t t = 0; t < a.trees_[k].size(); ++t) {
      const Tree& x = a.trees_[k][t];
      const Tree& y = b.trees_[k][t];
      if (x.nodes.size() != y.nodes.size() || x.leaves.size() != y.leaves.size()) return false;
      for (std::size_t i = 0; i < x.nodes.size(); ++i) {
        const auto& p = x.nodes[i];
        const auto& r = y.nodes[i];
        if (p.feature != r.feature || p.threshold != r.threshold || p.left != r.left || p.right != r.right ||
            p.leaf != r.leaf) {
          return false;
        }
      }
      for (std::size_t i = 0; i < x.leaves.size(); ++i) {
        if (x.leaves[i].prior != y.leaves[i].prior || x.leaves[i].mass != y.leaves[i].mass) return false;
      }
    }
  }
  return true;
}

Forest train_forest(const std::vector<ForestData>& per_output, const ForestParams& params,
                    std::uint64_t seed) {
  if (per_output.empty()) throw ParameterError("no forest outputs to train");
  if (params.n_trees < 1) throw ParameterError("n_trees must be >= 1");
  const Eigen::Index n = per_output.front().X.cols();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < per_output.size(); ++k) {
    const auto& d = per_output[k];
    if (d.X.rows() == 0) {
      throw DataError("no training samples for output " + std::to_string(k + 1));
    }
    if (d.X.cols() != n || d.X.rows() != d.q.size()) throw ParameterError("inconsistent forest training data");
    lo = std::min(lo, d.q.minCoeff());
    hi = std::max(hi, d.q.maxCoeff());
  }
  Vector edges = uniform_edges(lo, hi, params.bins, params.pad);

  std::vector<std::vector<Tree>> trees(per_output.size());
  for (std::size_t k = 0; k < per_output.size(); ++k) {
    const auto& d = per_output[k];
    const int m = static_cast<int>(d.X.rows());
    for (int t = 0; t < params.n_trees; ++t) {
      std::vector<int> rows(static_cast<std::size_t>(m));
      if (params.bootstrap) {
        std::mt19937_64 rng(derive_seed(seed, 2 * k + 1, t));
        std::uniform_int_distribution<int> pick(0, m - 1);
        for (int& r : rows) r = pick(rng);
        std::sort(rows.begin(), rows.end());
      } else {
        std::iota(rows.begin(), rows.end(), 0);
      }
      trees[k].push_back(train_tree(d.X, d.q, rows, edges, params.stopping, derive_seed(seed, 2 * k + 2, t)));
    }
  }
  return Forest(std::move(edges), static_cast<int>(n), std::move(trees));
}

QHistogram predict_qpdf(const Forest& forest, FlipperConfig c, const StateVector& x) {
  if (x.size() != forest.n_features()) throw ParameterError("state dimension does not match the forest");
  return forest.predict(config_index(c), x.values, x.missing);
}

void write_forest(std::ostream& out, const Forest& forest) {
  out << "trav-forest 1\n";
  out << "features " << forest.n_features() << '\n';
  out << "edges " << forest.edges().size();
  for (double e : forest.edges()) out << ' ' << io::format_double(e);
  out << '\n';
  out << "outputs " << forest.outputs() << '\n';
  for (int k = 0; k < forest.outputs(); ++k) {
    const auto& trees = forest.trees(k);
    out << "output " << k << " trees " << trees.size() << '\n';
    for (const Tree& tree : trees) {
      out << "tree " << tree.nodes.size() << ' ' << tree.leaves.size() << '\n';
      for (const TreeNode& n : tree.nodes) {
        if (n.is_leaf()) {
          const TreeLeaf& leaf = tree.leaves[n.leaf];
          out << "L " << io::format_double(leaf.prior);
          for (double m : leaf.mass) out << ' ' << io::format_double(m);
        } else {
          out << "N " << n.feature << ' ' << io::format_double(n.threshold);
        }
        out << '\n';
      }
    }
  }
}

namespace {

int read_subtree(std::istream& in, Tree& tree, int bins) {
  std::string tag;
  if (!(in >> tag)) throw DataError("truncated forest file");
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (tag == "L") {
    TreeLeaf leaf;
    leaf.prior = io::read_double(in);
    leaf.mass.resize(bins);
    for (int b = 0; b < bins; ++b) leaf.mass[b] = io::read_double(in);
    tree.nodes[id].leaf = static_cast<int>(tree.leaves.size());
    tree.leaves.push_back(std::move(leaf));
  } else if (tag == "N") {
    const int feature = static_cast<int>(io::read_int(in));
    const double threshold = io::read_double(in);
    const int l = read_subtree(in, tree, bins);
    const int r = read_subtree(in, tree, bins);
    TreeNode& n = tree.nodes[id];
    n.feature = feature;
    n.threshold = threshold;
    n.left = l;
    n.right = r;
  } else {
    throw DataError("unexpected forest record '" + tag + "'");
  }
  return id;
}

}  // namespace

Forest read_forest(std::istream& in) {
  io::expect_token(in, "trav-forest");
  if (io::read_int(in) != 1) throw DataError("unsupported forest version");
  io::expect_token(in, "features");
  const int n_features = static_cast<int>(io::read_int(in));
  io::expect_token(in, "edges");
  const int n_edges = static_cast<int>(io::read_int(in));
  Vector edges(n_edges);
  for (int i = 0; i < n_edges; ++i) edges[i] = io::read_double(in);
  io::expect_token(in, "outputs");
  const int outputs = static_cast<int>(io::read_int(in));
  std::vector<std::vector<Tree>> trees(static_cast<std::size_t>(outputs));
  for (int k = 0; k < outputs; ++k) {
    io::expect_token(in, "output");
    if (io::read_int(in) != k) throw DataError("forest outputs out of order");
    io::expect_token(in, "trees");
    const int count = static_cast<int>(io::read_int(in));
    for (int t = 0; t < count; ++t) {
      io::expect_token(in, "tree");
      const auto n_nodes = io::read_int(in);
      const auto n_leaves = io::read_int(in);
      Tree tree;
      read_subtree(in, tree, n_edges - 1);
      if (static_cast<long long>(tree.nodes.size()) != n_nodes ||
          static_cast<long long>(tree.leaves.size()) != n_leaves) {
        throw DataError("forest tree size mismatch");
      }
      trees[k].push_back(std::move(tree));
    }
  }
  return Forest(std::move(edges), n_features, std::move(trees));
}

}  // namespace trav
