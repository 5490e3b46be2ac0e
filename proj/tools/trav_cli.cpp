#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "trav/config.hpp"
#include "trav/corpus.hpp"
#include "trav/dataset.hpp"
#include "trav/forest.hpp"
#include "trav/gibbs.hpp"
#include "trav/gp.hpp"
#include "trav/harness.hpp"
#include "trav/qpdf_model.hpp"
#include "trav/tte.hpp"

namespace fs = std::filesystem;
using namespace trav;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string data = "data";

  ExperimentConfig load() const {
    Config cfg;
    if (!config.empty()) cfg = Config::load(config);
    ExperimentConfig e = ExperimentConfig::from_config(cfg);
    if (seed) e.seed = *seed;
    return e;
  }
};

void add_common(CLI::App* app, Common& c, bool needs_data = true) {
  app->add_option("--config", c.config, "key=value config file");
  app->add_option("--seed", c.seed, "seed (overrides the config)");
  if (needs_data) app->add_option("--data", c.data, "directory written by gen-data")->capture_default_str();
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

Dataset load_dataset(const Common& c) {
  auto in = open_in(fs::path(c.data) / "dataset.txt");
  return read_dataset(in);
}

std::vector<AnnotatedState> load_annotations(const Common& c) {
  auto in = open_in(fs::path(c.data) / "annotations.txt");
  return read_annotations(in);
}

// Writes CSV to `path`, or to stdout when empty.
void emit_csv(const std::string& path, const std::vector<CurvePoint>& points) {
  if (path.empty()) {
    write_curves(std::cout, points);
  } else {
    auto out = open_out(path);
    write_curves(out, points);
  }
}

std::shared_ptr<const ForestQpdf> load_forest_model(const std::string& path) {
  if (path.empty()) return nullptr;
  auto in = open_in(path);
  return std::make_shared<ForestQpdf>(read_forest(in));
}

std::shared_ptr<const GpQpdf> load_gp_model(const std::string& path, const ExperimentConfig& cfg) {
  if (path.empty()) return nullptr;
  auto in = open_in(path);
  auto [models, prior] = read_gp_bundle(in);
  return make_gp_qpdf(std::move(models), std::move(prior), cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flipper-configuration control with incomplete terrain data"};
  app.require_subcommand(1);

  Common common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "synthesize the annotated obstacle corpus");
  add_common(gen, common, false);
  std::string gen_out = "data";
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train a QPDF model");
  add_common(train, common);
  std::string model_kind = "forest";
  std::string train_out;
  std::string train_csv;
  train->add_option("--model", model_kind, "forest, gp-se or gp-rq")
      ->check(CLI::IsMember({"forest", "gp-se", "gp-rq"}))
      ->capture_default_str();
  train->add_option("--out", train_out, "model file")->required();
  train->add_option("--csv", train_csv, "training success-rate CSV (default stdout)");

  // train-tte
  auto* train_tte = app.add_subcommand("train-tte", "train the exploration forest");
  add_common(train_tte, common);
  std::string tte_forest;
  std::string tte_out;
  std::string tte_csv;
  train_tte->add_option("--forest", tte_forest, "QPDF forest judging safety")->required();
  train_tte->add_option("--out", tte_out, "exploration forest file")->required();
  train_tte->add_option("--csv", tte_csv, "per-episode safe-rollout share (default stdout)");

  // eval-occlusion
  auto* eval_occ = app.add_subcommand("eval-occlusion", "success rate against DEM occlusion");
  add_common(eval_occ, common);
  std::string occ_forest, occ_gp_se, occ_gp_rq, occ_csv;
  bool occ_gate = false;
  eval_occ->add_option("--forest", occ_forest, "forest model file");
  eval_occ->add_option("--gp-se", occ_gp_se, "SE GP bundle");
  eval_occ->add_option("--gp-rq", occ_gp_rq, "RQ GP bundle");
  eval_occ->add_option("--out", occ_csv, "CSV file (default stdout)");
  eval_occ->add_flag("--gate", occ_gate, "apply the safety gate instead of the plain argmax");

  // eval-tte
  auto* eval_tte = app.add_subcommand("eval-tte", "success rate against revealed bins");
  add_common(eval_tte, common);
  std::string et_forest, et_rl, et_gp_se, et_csv;
  eval_tte->add_option("--forest", et_forest, "forest model file");
  eval_tte->add_option("--rl", et_rl, "exploration forest file");
  eval_tte->add_option("--gp-se", et_gp_se, "SE GP bundle");
  eval_tte->add_option("--out", et_csv, "CSV file (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "explore one occluded state until a configuration is safe");
  add_common(sim, common);
  std::string sim_forest, sim_gp, sim_rl, sim_strategy = "random";
  int sim_state = 0;
  double sim_occlusion = -1.0;
  bool verbose = false;
  sim->add_option("--forest", sim_forest, "forest model file");
  sim->add_option("--gp", sim_gp, "GP bundle (instead of a forest)");
  sim->add_option("--rl", sim_rl, "exploration forest for --strategy rl");
  sim->add_option("--strategy", sim_strategy, "random, ard or rl")
      ->check(CLI::IsMember({"random", "ard", "rl"}))
      ->capture_default_str();
  sim->add_option("--state", sim_state, "index into the annotated states")->capture_default_str();
  sim->add_option("--occlusion", sim_occlusion, "occluded fraction (default from config)");
  sim->add_flag("--verbose,-v", verbose, "print one line per probe");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = common.load();
    const StateLayout layout = layout_for(cfg.corpus.geometry);

    if (gen->parsed()) {
      const Corpus corpus = generate_corpus(cfg.corpus, cfg.seed);
      fs::create_directories(gen_out);
      auto ds = open_out(fs::path(gen_out) / "dataset.txt");
      write_dataset(ds, corpus.dataset);
      auto an = open_out(fs::path(gen_out) / "annotations.txt");
      write_annotations(an, corpus.states);
      std::cerr << corpus.states.size() << " annotated states, " << corpus.dataset.transition_count()
                << " transitions\n";
      return 0;
    }

    if (train->parsed()) {
      const Dataset data = load_dataset(common);
      const auto states = load_annotations(common);
      const std::vector<QSample> samples = dataset_q_samples(data, cfg.qlearning);
      std::shared_ptr<const QpdfModel> model;
      if (model_kind == "forest") {
        Forest forest = train_qpdf_forest(samples, cfg.forest, cfg.seed);
        auto out = open_out(train_out);
        write_forest(out, forest);
        model = std::make_shared<ForestQpdf>(std::move(forest));
      } else {
        const KernelKind kind = model_kind == "gp-se" ? KernelKind::kSE : KernelKind::kRQ;
        std::vector<GPModel> gps = train_qpdf_gps(samples, kind, cfg.gp, cfg.seed);
        GmrfPrior prior = fit_gmrf_prior(corpus_states(states), data.layout());
        auto out = open_out(train_out);
        write_gp_bundle(out, gps, prior);
        model = make_gp_qpdf(std::move(gps), std::move(prior), cfg);
      }
      CurvePoint p;
      p.method = model_kind;
      p.success_rate = success_rate(states, argmax_policy(model));
      p.q25 = p.q75 = p.success_rate;
      emit_csv(train_csv, {p});
      return 0;
    }

    if (train_tte->parsed()) {
      const auto states = load_annotations(common);
      const auto forest = load_forest_model(tte_forest);
      const auto training = occluded_training_set(states, cfg.corpus.geometry, cfg.tte_occlusion);
      RlTrainStats stats;
      const Forest exploration = train_rl_strategy(training, *forest, cfg.rl, cfg.seed, &stats);
      auto out = open_out(tte_out);
      write_forest(out, exploration);
      std::vector<CurvePoint> points;
      for (std::size_t e = 0; e < stats.safe_share.size(); ++e) {
        CurvePoint p;
        p.method = "rl-rollouts";
        p.x = static_cast<double>(e);
        p.success_rate = p.q25 = p.q75 = stats.safe_share[e];
        points.push_back(p);
      }
      emit_csv(tte_csv, points);
      return 0;
    }

    if (eval_occ->parsed()) {
      const auto states = load_annotations(common);
      const auto methods = occlusion_methods(load_forest_model(occ_forest), load_gp_model(occ_gp_se, cfg),
                                             load_gp_model(occ_gp_rq, cfg), cfg.corpus.geometry, cfg);
      if (methods.empty()) throw ParameterError("give at least one model");
      SweepParams sp;
      sp.ensemble_seeds = cfg.ensemble_seeds;
      sp.seed = cfg.seed;
      sp.gate = occ_gate;
      sp.epsilon = cfg.epsilon;
      emit_csv(occ_csv, occlusion_sweep(states, methods, layout, sp));
      return 0;
    }

    if (eval_tte->parsed()) {
      const auto states = subsample_states(load_annotations(common), cfg.tte_max_states, cfg.seed);
      std::shared_ptr<const Forest> rl;
      if (!et_rl.empty()) {
        auto in = open_in(et_rl);
        rl = std::make_shared<Forest>(read_forest(in));
      }
      const auto methods = tte_methods(load_forest_model(et_forest), rl, load_gp_model(et_gp_se, cfg), layout);
      if (methods.empty()) throw ParameterError("give at least one model");
      TteCurveParams tp;
      tp.occlusion_fraction = cfg.tte_occlusion;
      tp.ensemble_seeds = cfg.ensemble_seeds;
      tp.seed = cfg.seed;
      emit_csv(et_csv, tte_curve(states, methods, layout, tp));
      return 0;
    }

    if (sim->parsed()) {
      const auto states = load_annotations(common);
      if (sim_state < 0 || sim_state >= static_cast<int>(states.size())) {
        throw ParameterError("--state out of range");
      }
      std::shared_ptr<const QpdfModel> model;
      std::shared_ptr<const GpQpdf> gp;
      if (!sim_gp.empty()) {
        gp = load_gp_model(sim_gp, cfg);
        model = gp;
      } else if (!sim_forest.empty()) {
        model = load_forest_model(sim_forest);
      } else {
        throw ParameterError("give --forest or --gp");
      }
      Strategy strategy;
      if (sim_strategy == "random") {
        strategy = make_random_strategy(cfg.seed);
      } else if (sim_strategy == "ard") {
        if (!gp) throw ParameterError("the ard strategy needs --gp");
        strategy = make_ard_strategy(gp);
      } else {
        if (sim_rl.empty()) throw ParameterError("the rl strategy needs --rl");
        auto in = open_in(sim_rl);
        strategy = make_rl_strategy(std::make_shared<Forest>(read_forest(in)), layout);
      }
      const double frac = sim_occlusion >= 0.0 ? sim_occlusion : cfg.tte_occlusion;
      const auto occluded = occluded_training_set({states[sim_state]}, cfg.corpus.geometry, frac);
      const TTEState start = TTEState::from_state(occluded.front().state, layout);
      const ExplorationTrace trace =
          explore_until_safe(start, occluded.front().ground_truth, strategy, *model, cfg.epsilon);
      if (verbose) {
        std::cout << "# initial best safety " << trace.initial_best_safety << ", " << start.missing_bins.size()
                  << " missing bins\n";
        write_trace(std::cout, trace);
      }
      if (trace.outcome == ExplorationOutcome::kSafeFound) {
        std::cout << "safe " << config_name(*trace.config) << " after " << trace.n() << " probes\n";
      } else {
        std::cout << "exhausted after " << trace.n() << " probes; manual flipper control requested\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
