#include "trav/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "trav/text_io.hpp"

namespace trav {

double success_rate(const std::vector<AnnotatedState>& states, const Policy& policy) {
  if (states.empty()) throw ParameterError("success rate of an empty state set");
  long hits = 0;
  for (const AnnotatedState& a : states) {
    const auto c = policy(a.state);
    if (c && a.permits(*c)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(states.size());
}

Policy argmax_policy(std::shared_ptr<const QpdfModel> model) {
  return [model](const StateVector& x) -> std::optional<FlipperConfig> {
    return select_unrestricted(model->means(x));
  };
}

Policy gated_policy(std::shared_ptr<const QpdfModel> model, double epsilon) {
  return [model, epsilon](const StateVector& x) -> std::optional<FlipperConfig> {
    const ActionDecision d = select_action(model->qpdfs(x), epsilon);
    if (const auto* c = std::get_if<ChosenAction>(&d)) return c->config;
    return std::nullopt;
  };
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("quantile of no values");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

StateVector occlude_state(const StateVector& full, int count, const StateLayout& layout) {
  if (count < 0 || count > layout.bins()) throw ParameterError("occlusion count out of range");
  if (full.size() != layout.dim()) throw ParameterError("state does not match the layout");
  StateVector s = full;
  for (int b = 0; b < count; ++b) {
    const int f = layout.feature_of_bin(b);
    s.values[f] = kNaN;
    s.missing[f] = true;
  }
  return s;
}

namespace {

std::vector<std::vector<int>> bootstrap_indices(std::size_t n, int seeds, std::uint64_t seed) {
  std::vector<std::vector<int>> out;
  for (int s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(derive_seed(seed, 0xb007, static_cast<std::uint64_t>(s)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<int> idx(n);
    for (int& i : idx) i = static_cast<int>(pick(rng));
    out.push_back(std::move(idx));
  }
  return out;
}

double rate_of(const std::vector<char>& hits, const std::vector<int>& idx) {
  long h = 0;
  for (int i : idx) h += hits[i];
  return static_cast<double>(h) / static_cast<double>(idx.size());
}

double mean_of(const std::vector<char>& hits) {
  const long h = std::accumulate(hits.begin(), hits.end(), 0L);
  return static_cast<double>(h) / static_cast<double>(hits.size());
}

}  // namespace

std::vector<CurvePoint> occlusion_sweep(const std::vector<AnnotatedState>& states,
                                        const std::vector<NamedModel>& methods, const StateLayout& layout,
                                        const SweepParams& params) {
  if (states.empty()) throw ParameterError("occlusion sweep needs states");
  if (params.ensemble_seeds < 1) throw ParameterError("need at least one ensemble seed");
  const auto boot = bootstrap_indices(states.size(), params.ensemble_seeds, params.seed);
  std::vector<CurvePoint> out;
  for (const NamedModel& m : methods) {
    if (m.step < 1) throw ParameterError("sweep step must be >= 1");
    const Policy policy = params.gate ? gated_policy(m.model, params.epsilon) : argmax_policy(m.model);
    for (int i = 0; i <= layout.bins(); ++i) {
      if (i % m.step != 0 && i != layout.bins()) continue;
      std::vector<char> hits(states.size());
      for (std::size_t k = 0; k < states.size(); ++k) {
        const auto c = policy(occlude_state(states[k].state, i, layout));
        hits[k] = c && states[k].permits(*c);
      }
      CurvePoint p;
      p.method = m.name;
      p.x = 100.0 * i / layout.bins();
      p.success_rate = mean_of(hits);
      for (const auto& idx : boot) p.per_seed.push_back(rate_of(hits, idx));
      p.q25 = quantile(p.per_seed, 0.25);
      p.q75 = quantile(p.per_seed, 0.75);
      out.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

// hits[k][state] for one strategy instance.
std::vector<std::vector<char>> reveal_curve(const std::vector<AnnotatedState>& states, const QpdfModel& model,
                                            const Strategy& strategy, const StateLayout& layout, int occluded) {
  std::vector<std::vector<char>> hits(occluded + 1, std::vector<char>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StateVector& full = states[i].state;
    TTEState s = TTEState::from_state(occlude_state(full, occluded, layout), layout);
    for (int k = 0; k <= occluded; ++k) {
      if (k > 0) {
        const int bin = strategy(s);
        s.reveal(bin, full.values[layout.feature_of_bin(bin)], layout);
      }
      hits[k][i] = states[i].permits(select_unrestricted(model.means(s.state)));
    }
  }
  return hits;
}

}  // namespace

std::vector<CurvePoint> tte_curve(const std::vector<AnnotatedState>& states, const std::vector<TteMethod>& methods,
                                  const StateLayout& layout, const TteCurveParams& params) {
  if (states.empty()) throw ParameterError("TTE curve needs states");
  if (params.ensemble_seeds < 1) throw ParameterError("need at least one ensemble seed");
  if (!(params.occlusion_fraction >= 0.0 && params.occlusion_fraction <= 1.0)) {
    throw ParameterError("occlusion fraction must lie in [0, 1]");
  }
  const int occluded = static_cast<int>(std::lround(params.occlusion_fraction * layout.bins()));
  const auto boot = bootstrap_indices(states.size(), params.ensemble_seeds, params.seed);
  std::vector<CurvePoint> out;
  for (const TteMethod& m : methods) {
    std::vector<std::vector<std::vector<char>>> runs;  // per seed
    if (m.stochastic) {
      for (int s = 0; s < params.ensemble_seeds; ++s) {
        const Strategy st = m.strategy(derive_seed(params.seed, 0x5eed, static_cast<std::uint64_t>(s)));
        runs.push_back(reveal_curve(states, *m.model, st, layout, occluded));
      }
    } else {
      runs.push_back(reveal_curve(states, *m.model, m.strategy(params.seed), layout, occluded));
    }
    for (int k = 0; k <= occluded; ++k) {
      CurvePoint p;
      p.method = m.name;
      p.x = k;
      for (int s = 0; s < params.ensemble_seeds; ++s) {
        const auto& hits = runs[m.stochastic ? s : 0][k];
        p.per_seed.push_back(rate_of(hits, boot[s]));
      }
      double full = 0.0;
      for (const auto& run : runs) full += mean_of(run[k]);
      p.success_rate = full / static_cast<double>(runs.size());
      p.q25 = quantile(p.per_seed, 0.25);
      p.q75 = quantile(p.per_seed, 0.75);
      out.push_back(std::move(p));
    }
  }
  return out;
}

void write_curves(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << "method,x,success_rate,q25,q75\n";
  for (const CurvePoint& p : points) {
    out << p.method << ',' << io::format_double(p.x) << ',' << io::format_double(p.success_rate) << ','
        << io::format_double(p.q25) << ',' << io::format_double(p.q75) << '\n';
  }
}

ExperimentConfig ExperimentConfig::from_config(const Config& cfg) {
  cfg.require_known({
      "seed", "rows", "cols", "resolution", "vres", "replicates", "run_up", "run_out", "sensor_noise",
      "alpha", "gamma", "q_iters", "q_tolerance", "w_user", "w_pitch", "w_rough", "epsilon",
      "forest.trees", "forest.min_samples", "forest.max_depth", "forest.features_per_split", "forest.bins",
      "forest.pad", "forest.bootstrap", "gp.restarts", "gp.iters", "gp.tolerance", "gp.max_points",
      "gp.min_noise", "gibbs.samples", "gibbs.burn_in", "gibbs.mixture", "sweep.step", "sweep.gibbs_step",
      "ensemble.seeds", "tte.occlusion", "tte.max_states", "rl.episodes", "rl.rollouts", "rl.alpha",
      "rl.gamma", "rl.learned_share", "rl.max_probes", "rl.trees", "rl.min_samples", "rl.max_depth",
      "rl.features_per_split",
  });
  ExperimentConfig e;
  e.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  DemGeometry& g = e.corpus.geometry;
  g.rows = static_cast<int>(cfg.get_int("rows", g.rows));
  g.cols = static_cast<int>(cfg.get_int("cols", g.cols));
  g.resolution = cfg.get_double("resolution", g.resolution);
  g.vertical_resolution = cfg.get_double("vres", g.vertical_resolution);
  e.corpus.replicates = static_cast<int>(cfg.get_int("replicates", e.corpus.replicates));
  e.corpus.run_up = cfg.get_double("run_up", e.corpus.run_up);
  e.corpus.run_out = cfg.get_double("run_out", e.corpus.run_out);
  e.corpus.sensor_noise = cfg.get_double("sensor_noise", e.corpus.sensor_noise);

  QLearningParams& q = e.qlearning;
  q.alpha = cfg.get_double("alpha", q.alpha);
  q.gamma = cfg.get_double("gamma", q.gamma);
  q.iters = static_cast<int>(cfg.get_int("q_iters", q.iters));
  q.tolerance = cfg.get_double("q_tolerance", q.tolerance);
  q.weights.user = cfg.get_double("w_user", q.weights.user);
  q.weights.pitch = cfg.get_double("w_pitch", q.weights.pitch);
  q.weights.roughness = cfg.get_double("w_rough", q.weights.roughness);
  e.corpus.weights = q.weights;
  e.epsilon = cfg.get_double("epsilon", e.epsilon);

  ForestParams& f = e.forest;
  f.n_trees = static_cast<int>(cfg.get_int("forest.trees", f.n_trees));
  f.stopping.min_samples = static_cast<int>(cfg.get_int("forest.min_samples", f.stopping.min_samples));
  f.stopping.max_depth = static_cast<int>(cfg.get_int("forest.max_depth", f.stopping.max_depth));
  f.stopping.features_per_split =
      static_cast<int>(cfg.get_int("forest.features_per_split", f.stopping.features_per_split));
  f.bins = static_cast<int>(cfg.get_int("forest.bins", f.bins));
  f.pad = cfg.get_double("forest.pad", f.pad);
  f.bootstrap = cfg.get_bool("forest.bootstrap", f.bootstrap);

  GpTrainParams& gp = e.gp;
  gp.restarts = static_cast<int>(cfg.get_int("gp.restarts", gp.restarts));
  gp.max_iters = static_cast<int>(cfg.get_int("gp.iters", gp.max_iters));
  gp.tolerance = cfg.get_double("gp.tolerance", gp.tolerance);
  gp.max_points = static_cast<int>(cfg.get_int("gp.max_points", gp.max_points));
  gp.min_noise_variance = cfg.get_double("gp.min_noise", gp.min_noise_variance);

  e.gibbs.n_samples = static_cast<int>(cfg.get_int("gibbs.samples", e.gibbs.n_samples));
  e.gibbs.burn_in = static_cast<int>(cfg.get_int("gibbs.burn_in", e.gibbs.burn_in));
  e.gibbs_mixture = cfg.get_bool("gibbs.mixture", e.gibbs_mixture);
  e.sweep_step = static_cast<int>(cfg.get_int("sweep.step", e.sweep_step));
  e.gibbs_sweep_step = static_cast<int>(cfg.get_int("sweep.gibbs_step", e.gibbs_sweep_step));
  e.ensemble_seeds = static_cast<int>(cfg.get_int("ensemble.seeds", e.ensemble_seeds));
  e.tte_occlusion = cfg.get_double("tte.occlusion", e.tte_occlusion);
  e.tte_max_states = static_cast<int>(cfg.get_int("tte.max_states", e.tte_max_states));

  RlTrainParams& rl = e.rl;
  rl.episodes = static_cast<int>(cfg.get_int("rl.episodes", rl.episodes));
  rl.rollouts_per_episode = static_cast<int>(cfg.get_int("rl.rollouts", rl.rollouts_per_episode));
  rl.alpha = cfg.get_double("rl.alpha", rl.alpha);
  rl.gamma = cfg.get_double("rl.gamma", rl.gamma);
  rl.learned_share = cfg.get_double("rl.learned_share", rl.learned_share);
  rl.max_probes = static_cast<int>(cfg.get_int("rl.max_probes", rl.max_probes));
  rl.epsilon = e.epsilon;
  rl.forest.n_trees = static_cast<int>(cfg.get_int("rl.trees", rl.forest.n_trees));
  rl.forest.stopping.min_samples = static_cast<int>(cfg.get_int("rl.min_samples", rl.forest.stopping.min_samples));
  rl.forest.stopping.max_depth = static_cast<int>(cfg.get_int("rl.max_depth", rl.forest.stopping.max_depth));
  rl.forest.stopping.features_per_split =
      static_cast<int>(cfg.get_int("rl.features_per_split", rl.forest.stopping.features_per_split));
  return e;
}

std::vector<AnnotatedState> subsample_states(const std::vector<AnnotatedState>& states, int max_states,
                                             std::uint64_t seed) {
  if (max_states <= 0 || static_cast<std::size_t>(max_states) >= states.size()) return states;
  std::vector<int> idx(states.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, 0x5b5e7));
  for (int i = 0; i < max_states; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_states);
  std::sort(idx.begin(), idx.end());
  std::vector<AnnotatedState> out;
  for (int i : idx) out.push_back(states[i]);
  return out;
}

std::vector<OccludedState> occluded_training_set(const std::vector<AnnotatedState>& states,
                                                 const DemGeometry& geometry, double occlusion_fraction) {
  const StateLayout layout = layout_for(geometry);
  const int count = static_cast<int>(std::lround(occlusion_fraction * layout.bins()));
  std::vector<OccludedState> out;
  for (const AnnotatedState& a : states) {
    auto [proprio, dem] = split_state(a.state, geometry);
    out.push_back({occlude_state(a.state, count, layout), dem});
  }
  return out;
}

std::vector<StateVector> corpus_states(const std::vector<AnnotatedState>& states) {
  std::vector<StateVector> out;
  for (const AnnotatedState& a : states) out.push_back(a.state);
  return out;
}

std::shared_ptr<const GpQpdf> make_gp_qpdf(std::vector<GPModel> models, GmrfPrior prior,
                                           const ExperimentConfig& cfg) {
  if (models.empty()) throw ParameterError("no GP models");
  GpMarginalization mode = GpMarginalization::kMomentMatching;
  if (models.front().kernel().kind == KernelKind::kRQ) {
    mode = cfg.gibbs_mixture ? GpMarginalization::kGibbsMixture : GpMarginalization::kGibbs;
  }
  return std::make_shared<GpQpdf>(std::move(models), std::move(prior), mode, cfg.gibbs,
                                  derive_seed(cfg.seed, 0x61bb5));
}

std::vector<NamedModel> occlusion_methods(std::shared_ptr<const ForestQpdf> forest,
                                          std::shared_ptr<const GpQpdf> gp_se,
                                          std::shared_ptr<const GpQpdf> gp_rq, const DemGeometry& geometry,
                                          const ExperimentConfig& cfg) {
  std::vector<NamedModel> out;
  if (forest) {
    out.push_back({"forest-marginal", forest, cfg.sweep_step});
    out.push_back({"lsq+forest", std::make_shared<LsqQpdf>(forest, geometry), cfg.sweep_step});
  }
  if (gp_rq) out.push_back({"gp-rq-gibbs", gp_rq, cfg.gibbs_sweep_step});
  if (gp_se) {
    out.push_back({"gp-se-uncertain", gp_se, cfg.sweep_step});
    out.push_back({"lsq+gp", std::make_shared<LsqQpdf>(gp_se, geometry), cfg.sweep_step});
  }
  return out;
}

std::vector<TteMethod> tte_methods(std::shared_ptr<const ForestQpdf> forest,
                                   std::shared_ptr<const Forest> exploration,
                                   std::shared_ptr<const GpQpdf> gp_se, const StateLayout& layout) {
  std::vector<TteMethod> out;
  auto random = [](std::uint64_t seed) { return make_random_strategy(seed); };
  if (forest) {
    out.push_back({"forest+random", forest, random, true});
    if (exploration) {
      out.push_back({"forest+rl", forest,
                     [exploration, layout](std::uint64_t) { return make_rl_strategy(exploration, layout); }, false});
    }
  }
  if (gp_se) {
    out.push_back({"gp-se+random", gp_se, random, true});
    out.push_back({"gp-se+ard", gp_se, [gp_se](std::uint64_t) { return make_ard_strategy(gp_se); }, false});
  }
  return out;
}

}  // namespace trav
