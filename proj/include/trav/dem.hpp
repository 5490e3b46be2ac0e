#ifndef TRAV_DEM_HPP
#define TRAV_DEM_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>

#include "trav/types.hpp"

namespace trav {

struct DemGeometry {
  int rows = 20;                     // along the heading, row 0 farthest ahead
  int cols = 5;                      // across the heading, left to right
  double resolution = 0.10;          // meters per bin
  double vertical_resolution = 0.05; // height quantum in meters

  int bins() const { return rows * cols; }
  friend bool operator==(const DemGeometry&, const DemGeometry&) = default;
};

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Digital elevation map around the robot.
///
/// Heights under the missing mask are kept as ground truth so that
/// exploration can reveal them later; anything that builds model input goes
/// through assemble_state(), which replaces them with NaN. A DEM read from
/// a file has NaN under its mask.
struct DEM {
  DemGeometry geometry;
  Matrix heights;   // rows x cols
  BoolGrid missing; // rows x cols

  DEM() : DEM(DemGeometry{}) {}
  explicit DEM(const DemGeometry& g);

  int rows() const { return geometry.rows; }
  int cols() const { return geometry.cols; }
  int bins() const { return geometry.bins(); }

  // Bins are numbered row-major: bin = row * cols + col.
  double height(int bin) const { return heights(bin / cols(), bin % cols()); }
  bool is_missing(int bin) const { return missing(bin / cols(), bin % cols()); }
  int missing_count() const { return static_cast<int>(missing.count()); }
};

double quantize_height(double h, double vertical_resolution);

enum class TerrainKind { kFlat, kPallet, kStaircase, kRubble };

TerrainKind terrain_kind_from_string(const std::string& s);
const char* to_string(TerrainKind kind);

/// Shape parameters for generate_terrain(). Unused fields are ignored for
/// kinds that do not need them.
struct TerrainParams {
  // pallet: a plateau of `height` covering rows [start_row, start_row + length_bins)
  double height = 0.14;
  int length_bins = 12;
  int start_row = 0;
  // staircase: `step_count` steps rising away from the robot, the first one
  // beginning at `start_row` and each `step_depth_bins` rows deep
  int step_count = 3;
  double step_height = 0.14;
  int step_depth_bins = 3;
  // rubble: independent uniform heights in [0, amp] per bin
  double amp = 0.10;
};

/// Fully observed synthetic terrain, deterministic in (kind, params, seed).
DEM generate_terrain(TerrainKind kind, const TerrainParams& params, std::uint64_t seed,
                     const DemGeometry& geometry = {});

/// Copy of `dem` with `count` bins marked missing, filled row by row from
/// row 0 (farthest ahead), left to right within a row. Heights under the
/// mask are retained.
DEM occlude_front(const DEM& dem, int count);

/// Copy of `dem` with the given bins unmasked. Bins must hold their ground
/// truth height.
DEM reveal(const DEM& dem, std::span<const int> bins);

/// Proprioceptive features in their canonical order.
struct Proprio {
  double speed_desired = 0.0;
  double speed_actual = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  std::array<double, 4> flipper_angles{};   // front-left, front-right, rear-left, rear-right
  std::array<double, 2> compliance{};       // front, rear
  std::array<double, 4> flipper_currents{}; // same order as flipper_angles
  FlipperConfig current_config = FlipperConfig::kVShape;

  static constexpr int kDim = 15;
  Vector to_vector() const;
  static Proprio from_vector(const Eigen::Ref<const Vector>& v);
};

/// Concatenates proprio (15 values) and the row-major DEM. Missing bins
/// become NaN and are flagged in the mask.
StateVector assemble_state(const Proprio& proprio, const DEM& dem);

/// Inverse of assemble_state(). Missing bins come back as NaN heights.
std::pair<Proprio, DEM> split_state(const StateVector& state, const DemGeometry& geometry);

StateLayout layout_for(const DemGeometry& geometry);

/// Text record: header `rows cols resolution vres`, then one line per row,
/// `NaN` for missing bins. Values are written with round-trip precision.
void write_dem(std::ostream& out, const DEM& dem);
DEM read_dem(std::istream& in);

}  // namespace trav

#endif  // TRAV_DEM_HPP
