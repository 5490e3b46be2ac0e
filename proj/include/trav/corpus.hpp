#ifndef TRAV_CORPUS_HPP
#define TRAV_CORPUS_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "trav/dataset.hpp"
#include "trav/dem.hpp"

namespace trav {

/// A fully observed state with one bipolar label per configuration.
struct AnnotatedState {
  StateVector state;
  PerConfig<int> labels{};  // +1 permitted, -1 forbidden
  int course = 0;
  int step = 0;

  bool permits(FlipperConfig c) const { return labels[config_index(c)] > 0; }
};

/// One straight drive over a single obstacle. Positions are meters along
/// the heading; the obstacle starts at x = 0.
struct CourseSpec {
  TerrainKind kind = TerrainKind::kFlat;
  double height = 0.15;      // pallet height or step height
  double length = 1.2;       // pallet/rubble extent
  int step_count = 4;        // staircase
  double step_depth = 0.3;   // staircase
  double amp = 0.15;         // rubble
  std::uint64_t seed = 0;
};

struct CorpusParams {
  DemGeometry geometry;
  int replicates = 2;           // noise seeds per course shape
  double run_up = 0.7;          // meters driven before the obstacle
  double run_out = 0.5;         // meters driven past it
  double step = 0.1;            // meters between recorded states
  double sensor_noise = 0.01;   // proprioceptive noise (std)
  RewardWeights weights;
};

/// Labels from the measured state:
///   rough ground ahead or underneath  -> U-shape-soft
///   pitched up / down                 -> U-shape-hard / I-shape
///   a rise / drop within 0.95 m ahead -> L-shape / I-shape
///   a rise / drop farther ahead       -> as above, or V-shape
///   otherwise                         -> V-shape
PerConfig<int> annotate(const Proprio& proprio, const DEM& dem);

/// The operator's pick: the first permitted configuration in the order
/// L, I, U-soft, U-hard, V.
FlipperConfig operator_choice(const PerConfig<int>& labels);

struct Corpus {
  DemGeometry geometry;
  Dataset dataset;
  std::vector<AnnotatedState> states;
};

/// The shape grid: pallets (3 heights x 2 lengths), four-step staircases
/// (3 step heights) and one rubble field, each repeated `replicates` times
/// with its own noise seed.
std::vector<CourseSpec> course_grid(const CorpusParams& params, std::uint64_t seed);

/// Drives every course, recording one annotated state per step. The
/// operator's choices form one trajectory per course; every other
/// configuration in a state becomes a one-step trajectory that is terminal
/// when forbidden and otherwise continues to the operator's next state.
Corpus simulate_courses(const std::vector<CourseSpec>& courses, const CorpusParams& params);
Corpus generate_corpus(const CorpusParams& params, std::uint64_t seed);

/// `trav-annotations 1 n N dim D` header, then per state:
///   course step label_1..label_5 x_1..x_D
void write_annotations(std::ostream& out, const std::vector<AnnotatedState>& states);
std::vector<AnnotatedState> read_annotations(std::istream& in);

}  // namespace trav

#endif  // TRAV_CORPUS_HPP
