#include "trav/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "trav/forest.hpp"
#include "trav/text_io.hpp"

namespace trav {

namespace {

constexpr double kLabelStep = 0.1;    // rise/drop/roughness threshold in meters
constexpr double kPitchLimit = 0.1;   // rad
constexpr double kNearAhead = 0.95;   // meters; rows closer than this are "near"
constexpr double kRoughBehind = 0.25; // rough ground matters down to this far behind the center
constexpr double kTrackHalf = 0.25;   // center to track contact

// Row offset from the robot center along the heading; row 0 is farthest ahead.
double row_offset(const DemGeometry& g, int r) { return (0.5 * g.rows - 0.5 - r) * g.resolution; }

struct Terrain {
  CourseSpec spec;
  Matrix rubble;  // cells x cols

  double z(double x, int col) const {
    switch (spec.kind) {
      case TerrainKind::kFlat:
        return 0.0;
      case TerrainKind::kPallet:
        return (x >= 0.0 && x < spec.length) ? spec.height : 0.0;
      case TerrainKind::kStaircase: {
        if (x < 0.0) return 0.0;
        const int k = static_cast<int>(std::floor(x / spec.step_depth)) + 1;
        return spec.height * std::min(k, spec.step_count);
      }
      case TerrainKind::kRubble: {
        if (x < 0.0 || x >= spec.length) return 0.0;
        const int cell = std::min(static_cast<int>(std::floor(x / 0.1)), static_cast<int>(rubble.rows()) - 1);
        return rubble(cell, col);
      }
    }
    return 0.0;
  }

  double extent() const {
    switch (spec.kind) {
      case TerrainKind::kFlat: return 0.0;
      case TerrainKind::kStaircase: return spec.step_count * spec.step_depth;
      default: return spec.length;
    }
  }

  // Highest contact under a track centered at x.
  double contact(double x, int cols) const {
    double h = -std::numeric_limits<double>::infinity();
    for (double dx : {-0.05, 0.05}) {
      for (int c = 0; c < cols; ++c) h = std::max(h, z(x + dx, c));
    }
    return h;
  }
};

struct ConfigPose {
  double front_angle, rear_angle, front_compliance, rear_compliance;
};

ConfigPose pose_of(FlipperConfig c) {
  switch (c) {
    case FlipperConfig::kIShape: return {0.0, 0.0, 0.5, 0.5};
    case FlipperConfig::kVShape: return {0.6, 0.6, 0.5, 0.5};
    case FlipperConfig::kLShape: return {1.2, 0.2, 0.8, 0.5};
    case FlipperConfig::kUShapeSoft: return {-0.6, -0.6, 0.2, 0.2};
    case FlipperConfig::kUShapeHard: return {-0.6, -0.6, 1.0, 1.0};
  }
  return {0.0, 0.0, 0.5, 0.5};
}

bool rough_ground(const DEM& dem) {
  for (int r = 0; r < dem.rows(); ++r) {
    const double off = row_offset(dem.geometry, r);
    if (off > kNearAhead || off < -kRoughBehind) continue;
    if (dem.heights.row(r).maxCoeff() - dem.heights.row(r).minCoeff() >= kLabelStep - 1e-9) return true;
  }
  return false;
}

}  // namespace

PerConfig<int> annotate(const Proprio& proprio, const DEM& dem) {
  if (dem.missing_count() != 0) throw ParameterError("annotation needs a fully observed DEM");
  PerConfig<int> labels;
  labels.fill(-1);
  auto allow = [&](FlipperConfig c) { labels[config_index(c)] = 1; };
  double near_max = 0.0, near_min = 0.0, far_max = 0.0, far_min = 0.0;
  for (int r = 0; r < dem.rows(); ++r) {
    const double off = row_offset(dem.geometry, r);
    if (off <= 0.0) continue;
    const double hi = dem.heights.row(r).maxCoeff();
    const double lo = dem.heights.row(r).minCoeff();
    if (off <= kNearAhead) {
      near_max = std::max(near_max, hi);
      near_min = std::min(near_min, lo);
    } else {
      far_max = std::max(far_max, hi);
      far_min = std::min(far_min, lo);
    }
  }
  const double step = kLabelStep - 1e-9;
  if (rough_ground(dem)) {
    allow(FlipperConfig::kUShapeSoft);
  } else if (proprio.pitch > kPitchLimit) {
    allow(FlipperConfig::kUShapeHard);
  } else if (proprio.pitch < -kPitchLimit) {
    allow(FlipperConfig::kIShape);
  } else if (near_max >= step) {
    allow(FlipperConfig::kLShape);
  } else if (near_min <= -step) {
    allow(FlipperConfig::kIShape);
  } else if (far_max >= step) {
    allow(FlipperConfig::kLShape);
    allow(FlipperConfig::kVShape);
  } else if (far_min <= -step) {
    allow(FlipperConfig::kIShape);
    allow(FlipperConfig::kVShape);
  } else {
    allow(FlipperConfig::kVShape);
  }
  return labels;
}

FlipperConfig operator_choice(const PerConfig<int>& labels) {
  for (FlipperConfig c : {FlipperConfig::kLShape, FlipperConfig::kIShape, FlipperConfig::kUShapeSoft,
                          FlipperConfig::kUShapeHard, FlipperConfig::kVShape}) {
    if (labels[config_index(c)] > 0) return c;
  }
  throw DataError("state without a permitted configuration");
}

std::vector<CourseSpec> course_grid(const CorpusParams& params, std::uint64_t seed) {
  if (params.replicates < 1) throw ParameterError("replicates must be >= 1");
  std::vector<CourseSpec> shapes;
  for (double h : {0.10, 0.15, 0.20}) {
    for (double len : {0.6, 1.2}) {
      CourseSpec c;
      c.kind = TerrainKind::kPallet;
      c.height = h;
      c.length = len;
      shapes.push_back(c);
    }
  }
  for (double h : {0.10, 0.15, 0.20}) {
    CourseSpec c;
    c.kind = TerrainKind::kStaircase;
    c.height = h;
    c.step_count = 4;
    c.step_depth = 0.3;
    shapes.push_back(c);
  }
  for (double amp : {0.20}) {
    CourseSpec c;
    c.kind = TerrainKind::kRubble;
    c.amp = amp;
    c.length = 0.8;
    shapes.push_back(c);
  }

  std::vector<CourseSpec> courses;
  for (int rep = 0; rep < params.replicates; ++rep) {
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      CourseSpec c = shapes[i];
      c.seed = derive_seed(seed, static_cast<std::uint64_t>(rep), i);
      courses.push_back(c);
    }
  }
  return courses;
}

Corpus simulate_courses(const std::vector<CourseSpec>& courses, const CorpusParams& params) {
  const DemGeometry& g = params.geometry;
  if (!(params.step > 0.0) || params.run_up < 0.0 || params.run_out < 0.0 || params.sensor_noise < 0.0) {
    throw ParameterError("invalid corpus parameters");
  }
  Corpus corpus;
  corpus.geometry = g;
  corpus.dataset.geometry = g;
  int traj_id = 0;
  for (std::size_t ci = 0; ci < courses.size(); ++ci) {
    Terrain terrain{courses[ci], Matrix()};
    std::mt19937_64 rng(courses[ci].seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto jitter = [&](double sd) { return sd * noise(rng); };
    if (terrain.spec.kind == TerrainKind::kRubble) {
      const int cells = std::max(1, static_cast<int>(std::ceil(terrain.spec.length / 0.1 - 1e-9)));
      std::uniform_real_distribution<double> u(0.0, terrain.spec.amp);
      terrain.rubble.resize(cells, g.cols);
      for (int i = 0; i < cells; ++i) {
        for (int c = 0; c < g.cols; ++c) terrain.rubble(i, c) = u(rng);
      }
    }
    const int n_steps = static_cast<int>(std::floor((params.run_up + terrain.extent() + params.run_out) / params.step + 1e-9)) + 1;

    std::vector<StateVector> states;
    std::vector<PerConfig<int>> labels;
    std::vector<double> pitches, roughness;
    FlipperConfig previous = FlipperConfig::kVShape;
    std::vector<FlipperConfig> actions;
    for (int t = 0; t < n_steps; ++t) {
      const double p = -params.run_up + t * params.step;
      const double zf = terrain.contact(p + kTrackHalf, g.cols);
      const double zr = terrain.contact(p - kTrackHalf, g.cols);
      const double z_ref = 0.5 * (zf + zr);
      DEM dem(g);
      for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
          dem.heights(r, c) = quantize_height(terrain.z(p + row_offset(g, r), c) - z_ref, g.vertical_resolution);
        }
      }
      const double true_pitch = std::atan((zf - zr) / (2.0 * kTrackHalf));
      const bool rough = rough_ground(dem);
      const double sd = params.sensor_noise;
      Proprio pr;
      pr.speed_desired = 0.3;
      pr.speed_actual = 0.3 - 0.15 * std::abs(true_pitch) - (rough ? 0.05 : 0.0) + jitter(sd);
      pr.roll = (rough ? 0.05 : 0.0) * noise(rng) + jitter(sd);
      pr.pitch = true_pitch + jitter(sd);
      const ConfigPose pose = pose_of(previous);
      const double load = std::max(0.0, zf - zr);
      pr.flipper_angles = {pose.front_angle - 0.5 * load + jitter(2 * sd), pose.front_angle - 0.5 * load + jitter(2 * sd),
                           pose.rear_angle + jitter(2 * sd), pose.rear_angle + jitter(2 * sd)};
      pr.compliance = {pose.front_compliance, pose.rear_compliance};
      const double current = 1.0 + 4.0 * load + (rough ? 0.5 : 0.0);
      pr.flipper_currents = {current + jitter(5 * sd), current + jitter(5 * sd), 1.0 + jitter(5 * sd),
                             1.0 + jitter(5 * sd)};
      pr.current_config = previous;

      const PerConfig<int> lab = annotate(pr, dem);
      const FlipperConfig op = operator_choice(lab);
      states.push_back(assemble_state(pr, dem));
      labels.push_back(lab);
      pitches.push_back(pr.pitch);
      roughness.push_back(rough ? 3.0 : 1.0);
      actions.push_back(op);
      corpus.states.push_back({states.back(), lab, static_cast<int>(ci), t});
      previous = op;
    }

    std::vector<Transition> chain;
    for (int t = 0; t < n_steps; ++t) {
      Transition tr;
      tr.state = states[t];
      tr.action = actions[t];
      tr.user_label = 1;
      tr.pitch = pitches[t];
      tr.roughness = roughness[t];
      if (t + 1 < n_steps) tr.next_state = states[t + 1];
      chain.push_back(std::move(tr));
    }
    corpus.dataset.trajectories.push_back(make_trajectory(traj_id++, std::move(chain)));
    for (int t = 0; t < n_steps; ++t) {
      for (int i = 0; i < kNumConfigs; ++i) {
        const FlipperConfig c = config_from_index(i);
        if (c == actions[t]) continue;
        Transition tr;
        tr.state = states[t];
        tr.action = c;
        tr.user_label = labels[t][i];
        tr.pitch = pitches[t];
        // Only the soft U-shape damps the vibration on rough ground.
        tr.roughness = (roughness[t] > 1.0 && c != FlipperConfig::kUShapeSoft) ? roughness[t] : 1.0;
        tr.terminal = tr.user_label < 0 || t + 1 == n_steps;
        if (!tr.terminal) tr.next_state = states[t + 1];
        corpus.dataset.trajectories.push_back(Trajectory{traj_id++, {std::move(tr)}});
      }
    }
  }
  return corpus;
}

Corpus generate_corpus(const CorpusParams& params, std::uint64_t seed) {
  return simulate_courses(course_grid(params, seed), params);
}

void write_annotations(std::ostream& out, const std::vector<AnnotatedState>& states) {
  const long long dim = states.empty() ? 0 : states.front().state.size();
  out << "trav-annotations 1 n " << states.size() << " dim " << dim << '\n';
  for (const AnnotatedState& a : states) {
    if (a.state.size() != dim) throw ParameterError("annotated states differ in dimension");
    out << a.course << ' ' << a.step;
    for (int l : a.labels) out << ' ' << l;
    for (Eigen::Index j = 0; j < dim; ++j) {
      out << ' ' << io::format_double(a.state.missing[j] ? kNaN : a.state.values[j]);
    }
    out << '\n';
  }
}

std::vector<AnnotatedState> read_annotations(std::istream& in) {
  io::expect_token(in, "trav-annotations");
  if (io::read_int(in) != 1) throw DataError("unsupported annotation format version");
  io::expect_token(in, "n");
  const long long n = io::read_int(in);
  io::expect_token(in, "dim");
  const long long dim = io::read_int(in);
  if (n < 0 || dim < 0) throw DataError("bad annotation header");
  std::vector<AnnotatedState> states(static_cast<std::size_t>(n));
  for (AnnotatedState& a : states) {
    a.course = static_cast<int>(io::read_int(in));
    a.step = static_cast<int>(io::read_int(in));
    for (int& l : a.labels) {
      l = static_cast<int>(io::read_int(in));
      if (l != 1 && l != -1) throw DataError("labels must be +1 or -1");
    }
    a.state.values.resize(dim);
    a.state.missing.resize(dim);
    for (long long j = 0; j < dim; ++j) {
      const double v = io::read_double(in);
      a.state.values[j] = v;
      a.state.missing[j] = std::isnan(v);
    }
  }
  return states;
}

}  // namespace trav
