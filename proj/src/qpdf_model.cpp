#include "trav/qpdf_model.hpp"

#include <istream>
#include <ostream>

#include "trav/text_io.hpp"

namespace trav {

PerConfig<double> QpdfModel::means(const StateVector& x) const {
  const PerConfig<Qpdf> q = qpdfs(x);
  PerConfig<double> out{};
  for (int i = 0; i < kNumConfigs; ++i) out[i] = expected_q(q[i]);
  return out;
}

ForestQpdf::ForestQpdf(Forest forest) : forest_(std::move(forest)) {
  if (forest_.outputs() != kNumConfigs) throw ParameterError("QPDF forest needs one output per configuration");
}

PerConfig<Qpdf> ForestQpdf::qpdfs(const StateVector& x) const {
  PerConfig<Qpdf> out;
  for (int i = 0; i < kNumConfigs; ++i) out[i] = forest_.predict(i, x.values, x.missing);
  return out;
}

PerConfig<double> ForestQpdf::means(const StateVector& x) const {
  PerConfig<double> out{};
  for (int i = 0; i < kNumConfigs; ++i) out[i] = forest_.predict_mean(i, x.values, x.missing);
  return out;
}

GpQpdf::GpQpdf(std::vector<GPModel> models, GmrfPrior prior, GpMarginalization mode, GibbsParams gibbs,
               std::uint64_t seed)
    : models_(std::move(models)), prior_(std::move(prior)), mode_(mode), gibbs_(gibbs), seed_(seed) {
  if (models_.size() != kNumConfigs) throw ParameterError("need one GP per configuration");
  prior_.validate();
  for (const GPModel& m : models_) {
    if (m.dim() != prior_.layout.dim()) throw ParameterError("GP input dimension does not match the layout");
    if (mode_ == GpMarginalization::kMomentMatching && m.kernel().kind != KernelKind::kSE) {
      throw ParameterError("moment matching needs SE kernels");
    }
  }
}

std::string GpQpdf::name() const {
  const std::string kernel = models_.front().kernel().kind == KernelKind::kSE ? "gp-se" : "gp-rq";
  switch (mode_) {
    case GpMarginalization::kMomentMatching: return kernel + "-uncertain";
    case GpMarginalization::kGibbs: return kernel + "-gibbs";
    case GpMarginalization::kGibbsMixture: return kernel + "-gibbs-mixture";
  }
  return kernel;
}

namespace {

// Input mean and marginal variances for moment matching.
std::pair<Vector, Vector> uncertain_input(const GmrfPrior& prior, const StateVector& x) {
  const MissingConditional cond = gmrf_conditional(prior, x);
  Vector mu = x.values;
  Vector var = Vector::Zero(x.size());
  for (std::size_t k = 0; k < cond.bins.size(); ++k) {
    const int f = prior.layout.feature_of_bin(cond.bins[k]);
    mu[f] = cond.mean[k];
    var[f] = cond.cov(k, k);
  }
  return {mu, var};
}

}  // namespace

PerConfig<Qpdf> GpQpdf::qpdfs(const StateVector& x) const {
  PerConfig<Qpdf> out;
  if (!x.any_missing()) {
    for (int i = 0; i < kNumConfigs; ++i) out[i] = predict(models_[i], x.values);
    return out;
  }
  if (mode_ == GpMarginalization::kMomentMatching) {
    const auto [mu, var] = uncertain_input(prior_, x);
    const Matrix cov = var.asDiagonal();
    for (int i = 0; i < kNumConfigs; ++i) out[i] = predict_uncertain(models_[i], mu, cov);
    return out;
  }
  const Matrix samples = gibbs_completions(x, prior_, gibbs_, seed_);
  for (int i = 0; i < kNumConfigs; ++i) {
    GaussMixture mix;
    mix.components.reserve(samples.rows());
    for (Eigen::Index s = 0; s < samples.rows(); ++s) {
      mix.components.push_back(predict(models_[i], samples.row(s).transpose()));
    }
    if (mode_ == GpMarginalization::kGibbs) {
      out[i] = collapse(mix);
    } else {
      out[i] = std::move(mix);
    }
  }
  return out;
}

PerConfig<double> GpQpdf::means(const StateVector& x) const {
  PerConfig<double> out{};
  if (!x.any_missing()) {
    for (int i = 0; i < kNumConfigs; ++i) out[i] = predict_mean(models_[i], x.values);
    return out;
  }
  if (mode_ == GpMarginalization::kMomentMatching) {
    const auto [mu, var] = uncertain_input(prior_, x);
    for (int i = 0; i < kNumConfigs; ++i) out[i] = predict_uncertain_mean(models_[i], mu, var);
    return out;
  }
  const Matrix samples = gibbs_completions(x, prior_, gibbs_, seed_);
  for (int i = 0; i < kNumConfigs; ++i) {
    double sum = 0.0;
    for (Eigen::Index s = 0; s < samples.rows(); ++s) {
      sum += predict_mean(models_[i], samples.row(s).transpose());
    }
    out[i] = sum / static_cast<double>(samples.rows());
  }
  return out;
}

LsqQpdf::LsqQpdf(std::shared_ptr<const QpdfModel> inner, DemGeometry geometry)
    : inner_(std::move(inner)), geometry_(geometry) {
  if (!inner_) throw ParameterError("LSq wrapper needs a model");
}

StateVector LsqQpdf::fill(const StateVector& x) const {
  if (!x.any_missing()) return x;
  auto [proprio, dem] = split_state(x, geometry_);
  return assemble_state(proprio, lsq_interpolate(dem));
}

PerConfig<Qpdf> LsqQpdf::qpdfs(const StateVector& x) const { return inner_->qpdfs(fill(x)); }

PerConfig<double> LsqQpdf::means(const StateVector& x) const { return inner_->means(fill(x)); }

std::vector<QSample> dataset_q_samples(const Dataset& data, const QLearningParams& params) {
  return q_targets(data.trajectories, params, tabular_fitter());
}

std::vector<ForestData> split_by_config(const std::vector<QSample>& samples) {
  std::vector<ForestData> out(kNumConfigs);
  if (samples.empty()) return out;
  const Eigen::Index n = samples.front().state.size();
  std::array<std::vector<int>, kNumConfigs> rows;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].state.size() != n) throw DataError("samples have inconsistent dimensions");
    rows[config_index(samples[k].action)].push_back(static_cast<int>(k));
  }
  for (int c = 0; c < kNumConfigs; ++c) {
    out[c].X.resize(static_cast<Eigen::Index>(rows[c].size()), n);
    out[c].q.resize(static_cast<Eigen::Index>(rows[c].size()));
    for (std::size_t r = 0; r < rows[c].size(); ++r) {
      const QSample& s = samples[rows[c][r]];
      out[c].X.row(static_cast<Eigen::Index>(r)) = s.state.values.transpose();
      out[c].q[static_cast<Eigen::Index>(r)] = s.q;
    }
  }
  return out;
}

Forest train_qpdf_forest(const std::vector<QSample>& samples, const ForestParams& params, std::uint64_t seed) {
  return train_forest(split_by_config(samples), params, seed);
}

std::vector<GPModel> train_qpdf_gps(const std::vector<QSample>& samples, KernelKind kind,
                                    const GpTrainParams& params, std::uint64_t seed) {
  const std::vector<ForestData> data = split_by_config(samples);
  std::vector<GPModel> models;
  models.reserve(kNumConfigs);
  for (int c = 0; c < kNumConfigs; ++c) {
    const ForestData& d = data[c];
    if (d.X.rows() < 2) {
      throw DataError(std::string("too few training samples for ") + config_name(config_from_index(c)));
    }
    if (!d.X.allFinite()) throw DataError("GP training samples must be fully observed");
    models.push_back(train_gp(d.X, d.q, kind, params, derive_seed(seed, 0x6a, static_cast<std::uint64_t>(c))));
  }
  return models;
}

void write_gp_bundle(std::ostream& out, const std::vector<GPModel>& models, const GmrfPrior& prior) {
  out << "trav-gp-bundle 1\nmodels " << models.size() << '\n';
  for (const GPModel& m : models) write_gp(out, m);
  const StateLayout& L = prior.layout;
  out << "prior " << L.proprio_dim << ' ' << L.rows << ' ' << L.cols << ' ';
  io::put(out, prior.neighbor_precision);
  out << ' ';
  io::put(out, prior.anchor_precision);
  out << '\n';
  for (Eigen::Index b = 0; b < prior.anchor_mean.size(); ++b) {
    if (b > 0) out << ' ';
    io::put(out, prior.anchor_mean[b]);
  }
  out << '\n';
}

std::pair<std::vector<GPModel>, GmrfPrior> read_gp_bundle(std::istream& in) {
  io::expect_token(in, "trav-gp-bundle");
  if (io::read_int(in) != 1) throw DataError("unsupported GP bundle version");
  io::expect_token(in, "models");
  const long long n = io::read_int(in);
  if (n < 1) throw DataError("GP bundle holds no models");
  std::vector<GPModel> models;
  for (long long i = 0; i < n; ++i) models.push_back(read_gp(in));
  io::expect_token(in, "prior");
  GmrfPrior prior;
  prior.layout.proprio_dim = static_cast<int>(io::read_int(in));
  prior.layout.rows = static_cast<int>(io::read_int(in));
  prior.layout.cols = static_cast<int>(io::read_int(in));
  prior.neighbor_precision = io::read_double(in);
  prior.anchor_precision = io::read_double(in);
  prior.anchor_mean.resize(prior.layout.bins());
  for (int b = 0; b < prior.layout.bins(); ++b) prior.anchor_mean[b] = io::read_double(in);
  prior.validate();
  return {std::move(models), std::move(prior)};
}

}  // namespace trav
