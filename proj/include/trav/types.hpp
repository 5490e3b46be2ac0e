#ifndef TRAV_TYPES_HPP
#define TRAV_TYPES_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace trav {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Thrown for out-of-range or inconsistent arguments.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation needs data that is not there (absent table
/// entry, missing configuration, unreadable file).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The five pre-set flipper configurations. Values are the 1-based ids used
/// in files and on the command line.
enum class FlipperConfig : int {
  kIShape = 1,
  kVShape = 2,
  kLShape = 3,
  kUShapeSoft = 4,
  kUShapeHard = 5,
};

inline constexpr int kNumConfigs = 5;

constexpr int config_index(FlipperConfig c) { return static_cast<int>(c) - 1; }
constexpr FlipperConfig config_from_index(int i) { return static_cast<FlipperConfig>(i + 1); }

inline FlipperConfig config_from_id(int id) {
  if (id < 1 || id > kNumConfigs) {
    throw ParameterError("flipper configuration id out of range: " + std::to_string(id));
  }
  return static_cast<FlipperConfig>(id);
}

inline const char* config_name(FlipperConfig c) {
  switch (c) {
    case FlipperConfig::kIShape: return "I-shape";
    case FlipperConfig::kVShape: return "V-shape";
    case FlipperConfig::kLShape: return "L-shape";
    case FlipperConfig::kUShapeSoft: return "U-shape-soft";
    case FlipperConfig::kUShapeHard: return "U-shape-hard";
  }
  return "?";
}

template <typename T>
using PerConfig = std::array<T, kNumConfigs>;

/// Shape of the feature vector: proprioceptive block followed by the
/// row-major DEM block.
struct StateLayout {
  int proprio_dim = 15;
  int rows = 20;
  int cols = 5;

  int bins() const { return rows * cols; }
  int dim() const { return proprio_dim + bins(); }
  int feature_of_bin(int bin) const { return proprio_dim + bin; }
  bool is_dem_feature(int j) const { return j >= proprio_dim && j < dim(); }

  friend bool operator==(const StateLayout&, const StateLayout&) = default;
};

/// Feature values plus a missing mask. Missing entries hold NaN so that a
/// masked height can never leak into a model.
struct StateVector {
  Vector values;
  Mask missing;

  Eigen::Index size() const { return values.size(); }
  bool any_missing() const { return missing.any(); }
};

}  // namespace trav

#endif  // TRAV_TYPES_HPP
