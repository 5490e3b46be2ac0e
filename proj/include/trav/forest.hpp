#ifndef TRAV_FOREST_HPP
#define TRAV_FOREST_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trav/histogram.hpp"
#include "trav/types.hpp"

namespace trav {

/// A training sample's membership in a node. Samples whose split feature is
/// missing descend into both children with half their weight.
struct WeightedSample {
  int index = 0;
  double weight = 1.0;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double objective = 0.0;  // weighted SSE of q on the left plus on the right
};

/// Tolerance under which two split objectives count as tied for a node
/// whose own weighted SSE is `node_sse`.
double split_tie_tolerance(double node_sse);

/// Variance-minimizing split of the samples in `node` over `features`
/// (ascending). X holds one sample per row with NaN for missing entries.
///
/// For feature j and threshold s, R1 = {x_j <= s} and R2 = {x_j > s};
/// samples with x_j missing belong to both. The objective is
/// |R1| var(q|R1) + |R2| var(q|R2) with weighted counts and variances.
/// Thresholds are midpoints between consecutive distinct observed values.
/// Ties go to the lowest feature index, then the lowest threshold. Returns
/// nullopt when no feature has two distinct observed values.
std::optional<Split> best_split(const Matrix& X, const Vector& q, std::span<const WeightedSample> node,
                                std::span<const int> features);

/// best_split() over all samples with unit weight and all features.
std::optional<Split> best_split(const Matrix& X, const Vector& q);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;     // index into Tree::leaves for leaves
  bool is_leaf() const { return feature < 0; }
};

struct TreeLeaf {
  Vector mass;         // histogram over the forest's q-bin edges
  double prior = 0.0;  // weighted share of training samples reaching the leaf
};

/// Regression tree with histogram leaves. Nodes are stored in preorder, so
/// node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<TreeLeaf> leaves;

  /// Leaves reachable by `x` together with their stored priors. A node that
  /// tests a missing feature is passed on both sides.
  std::vector<std::pair<int, double>> reached_leaves(const Eigen::Ref<const Vector>& x,
                                                     const Mask& missing) const;
  int depth() const;
};

struct StoppingParams {
  int min_samples = 5;          // nodes with at most this many samples become leaves
  int max_depth = 12;
  int features_per_split = 0;   // candidate features drawn per node; 0 means all
};

/// Greedy recursive tree growth. `samples` lists the training rows (repeats
/// allowed, as produced by bootstrap); `seed` drives the per-node feature
/// draws when features_per_split is set.
Tree train_tree(const Matrix& X, const Vector& q, std::span<const int> samples, const Vector& edges,
                const StoppingParams& stopping, std::uint64_t seed);

/// Convenience overload on all rows of X.
Tree train_tree(const Matrix& X, const Vector& q, const Vector& edges, const StoppingParams& stopping,
                std::uint64_t seed);

struct ForestParams {
  int n_trees = 32;
  StoppingParams stopping;
  int bins = 40;
  double pad = 0.05;
  bool bootstrap = true;
};

/// Training rows and targets for one forest output.
struct ForestData {
  Matrix X;
  Vector q;
};

/// One independently trained list of trees per output (flipper configuration
/// for QPDF models), all sharing one q-bin layout.
class Forest {
 public:
  Forest() = default;
  Forest(Vector edges, int n_features, std::vector<std::vector<Tree>> trees);

  int outputs() const { return static_cast<int>(trees_.size()); }
  int n_features() const { return n_features_; }
  const Vector& edges() const { return edges_; }
  const std::vector<Tree>& trees(int output) const { return trees_.at(output); }

  /// Multiple-leaves marginalization: every tree contributes the
  /// prior-weighted average of its reached leaves (priors renormalized over
  /// the reached set); trees are averaged with equal weight.
  QHistogram predict(int output, const Eigen::Ref<const Vector>& x, const Mask& missing) const;
  /// Mean of predict(); avoids building the histogram for callers that only
  /// rank outputs.
  double predict_mean(int output, const Eigen::Ref<const Vector>& x, const Mask& missing) const;

  friend bool operator==(const Forest& a, const Forest& b);

 private:
  Vector edges_;
  int n_features_ = 0;
  std::vector<std::vector<Tree>> trees_;
};

/// Trains `params.n_trees` trees per output, each on a bootstrap resample;
/// tree t of output k uses a seed derived from (seed, k, t). The q-bin
/// layout spans all outputs' targets. Throws DataError naming the first
/// output without samples.
Forest train_forest(const std::vector<ForestData>& per_output, const ForestParams& params,
                    std::uint64_t seed);

/// QPDF of configuration `c` for a (possibly incomplete) state.
QHistogram predict_qpdf(const Forest& forest, FlipperConfig c, const StateVector& x);

/// Versioned text format, trees in preorder, values in round-trip decimal.
void write_forest(std::ostream& out, const Forest& forest);
Forest read_forest(std::istream& in);

/// splitmix64-style mixing for derived seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace trav

#endif  // TRAV_FOREST_HPP
