#include "trav/dem.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "trav/text_io.hpp"

namespace trav {

DEM::DEM(const DemGeometry& g)
    : geometry(g),
      heights(Matrix::Zero(g.rows, g.cols)),
      missing(BoolGrid::Constant(g.rows, g.cols, false)) {
  if (g.rows <= 0 || g.cols <= 0) throw ParameterError("DEM needs rows > 0 and cols > 0");
  if (!(g.resolution > 0.0) || !(g.vertical_resolution > 0.0)) {
    throw ParameterError("DEM resolutions must be positive");
  }
}

double quantize_height(double h, double vertical_resolution) {
  return std::round(h / vertical_resolution) * vertical_resolution;
}

TerrainKind terrain_kind_from_string(const std::string& s) {
  if (s == "flat") return TerrainKind::kFlat;
  if (s == "pallet") return TerrainKind::kPallet;
  if (s == "staircase") return TerrainKind::kStaircase;
  if (s == "rubble") return TerrainKind::kRubble;
  throw ParameterError("unknown terrain kind: " + s);
}

const char* to_string(TerrainKind kind) {
  switch (kind) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kPallet: return "pallet";
    case TerrainKind::kStaircase: return "staircase";
    case TerrainKind::kRubble: return "rubble";
  }
  return "?";
}

DEM generate_terrain(TerrainKind kind, const TerrainParams& p, std::uint64_t seed,
                     const DemGeometry& geometry) {
  DEM dem(geometry);
  const double vres = geometry.vertical_resolution;
  switch (kind) {
    case TerrainKind::kFlat:
      break;
    case TerrainKind::kPallet: {
      if (!(p.height > 0.0)) throw ParameterError("pallet height must be > 0");
      if (p.length_bins < 1) throw ParameterError("pallet length_bins must be >= 1");
      const double h = quantize_height(p.height, vres);
      for (int r = std::max(0, p.start_row); r < std::min(dem.rows(), p.start_row + p.length_bins); ++r) {
        dem.heights.row(r).setConstant(h);
      }
      break;
    }
    case TerrainKind::kStaircase: {
      if (p.step_count < 1) throw ParameterError("staircase step_count must be >= 1");
      if (p.step_depth_bins < 1) throw ParameterError("staircase step_depth_bins must be >= 1");
      if (!(p.step_height > 0.0)) throw ParameterError("staircase step_height must be > 0");
      for (int r = 0; r < dem.rows(); ++r) {
        if (r > p.start_row) continue;
        const int step = std::min(p.step_count, (p.start_row - r) / p.step_depth_bins + 1);
        dem.heights.row(r).setConstant(quantize_height(step * p.step_height, vres));
      }
      break;
    }
    case TerrainKind::kRubble: {
      if (!(p.amp >= 0.0)) throw ParameterError("rubble amplitude must be >= 0");
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int r = 0; r < dem.rows(); ++r) {
        for (int c = 0; c < dem.cols(); ++c) {
          dem.heights(r, c) = quantize_height(p.amp * u(rng), vres);
        }
      }
      break;
    }
  }
  return dem;
}

DEM occlude_front(const DEM& dem, int count) {
  if (count < 0 || count > dem.bins()) {
    throw ParameterError("occlusion count out of range: " + std::to_string(count));
  }
  DEM out = dem;
  for (int bin = 0; bin < count; ++bin) {
    out.missing(bin / dem.cols(), bin % dem.cols()) = true;
  }
  return out;
}

DEM reveal(const DEM& dem, std::span<const int> bins) {
  DEM out = dem;
  for (int bin : bins) {
    if (bin < 0 || bin >= dem.bins()) throw ParameterError("bin index out of range");
    if (!std::isfinite(dem.height(bin))) {
      throw DataError("cannot reveal bin " + std::to_string(bin) + ": no ground truth height");
    }
    out.missing(bin / dem.cols(), bin % dem.cols()) = false;
  }
  return out;
}

Vector Proprio::to_vector() const {
  Vector v(kDim);
  v << speed_desired, speed_actual, roll, pitch,
      flipper_angles[0], flipper_angles[1], flipper_angles[2], flipper_angles[3],
      compliance[0], compliance[1],
      flipper_currents[0], flipper_currents[1], flipper_currents[2], flipper_currents[3],
      static_cast<double>(static_cast<int>(current_config));
  return v;
}

Proprio Proprio::from_vector(const Eigen::Ref<const Vector>& v) {
  if (v.size() != kDim) throw ParameterError("proprio vector must have 15 entries");
  Proprio p;
  p.speed_desired = v[0];
  p.speed_actual = v[1];
  p.roll = v[2];
  p.pitch = v[3];
  for (int i = 0; i < 4; ++i) p.flipper_angles[i] = v[4 + i];
  for (int i = 0; i < 2; ++i) p.compliance[i] = v[8 + i];
  for (int i = 0; i < 4; ++i) p.flipper_currents[i] = v[10 + i];
  p.current_config = config_from_id(static_cast<int>(std::lround(v[14])));
  return p;
}

StateLayout layout_for(const DemGeometry& geometry) {
  return StateLayout{Proprio::kDim, geometry.rows, geometry.cols};
}

StateVector assemble_state(const Proprio& proprio, const DEM& dem) {
  const int n = Proprio::kDim + dem.bins();
  StateVector s;
  s.values.resize(n);
  s.missing = Mask::Constant(n, false);
  s.values.head(Proprio::kDim) = proprio.to_vector();
  for (int bin = 0; bin < dem.bins(); ++bin) {
    const int j = Proprio::kDim + bin;
    if (dem.is_missing(bin)) {
      s.values[j] = kNaN;
      s.missing[j] = true;
    } else {
      s.values[j] = dem.height(bin);
    }
  }
  return s;
}

std::pair<Proprio, DEM> split_state(const StateVector& state, const DemGeometry& geometry) {
  const int n = Proprio::kDim + geometry.bins();
  if (state.size() != n || state.missing.size() != n) {
    throw ParameterError("state vector length does not match the DEM geometry");
  }
  if (state.missing.head(Proprio::kDim).any()) {
    throw ParameterError("proprioceptive features cannot be missing");
  }
  Proprio p = Proprio::from_vector(state.values.head(Proprio::kDim));
  DEM dem(geometry);
  for (int bin = 0; bin < geometry.bins(); ++bin) {
    const int j = Proprio::kDim + bin;
    const int r = bin / geometry.cols, c = bin % geometry.cols;
    dem.missing(r, c) = state.missing[j];
    dem.heights(r, c) = state.missing[j] ? kNaN : state.values[j];
  }
  return {p, dem};
}

void write_dem(std::ostream& out, const DEM& dem) {
  const auto& g = dem.geometry;
  out << g.rows << ' ' << g.cols << ' ' << io::format_double(g.resolution) << ' '
      << io::format_double(g.vertical_resolution) << '\n';
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (c) out << ' ';
      out << (dem.missing(r, c) ? std::string("NaN") : io::format_double(dem.heights(r, c)));
    }
    out << '\n';
  }
}

DEM read_dem(std::istream& in) {
  DemGeometry g;
  g.rows = static_cast<int>(io::read_int(in));
  g.cols = static_cast<int>(io::read_int(in));
  g.resolution = io::read_double(in);
  g.vertical_resolution = io::read_double(in);
  DEM dem(g);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const double v = io::read_double(in);
      dem.heights(r, c) = v;
      dem.missing(r, c) = std::isnan(v);
    }
  }
  return dem;
}

}  // namespace trav
