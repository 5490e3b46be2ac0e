#ifndef TRAV_QPDF_MODEL_HPP
#define TRAV_QPDF_MODEL_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "trav/dataset.hpp"
#include "trav/forest.hpp"
#include "trav/gibbs.hpp"
#include "trav/gp.hpp"
#include "trav/policy.hpp"

namespace trav {

/// Per-configuration QPDFs for possibly incomplete states.
class QpdfModel {
 public:
  virtual ~QpdfModel() = default;
  virtual std::string name() const = 0;
  virtual PerConfig<Qpdf> qpdfs(const StateVector& x) const = 0;
  /// Expected q per configuration; models override this when the means are
  /// cheaper than full QPDFs.
  virtual PerConfig<double> means(const StateVector& x) const;
};

/// Forest marginalization over missing features.
class ForestQpdf : public QpdfModel {
 public:
  explicit ForestQpdf(Forest forest);
  std::string name() const override { return "forest-marginal"; }
  PerConfig<Qpdf> qpdfs(const StateVector& x) const override;
  PerConfig<double> means(const StateVector& x) const override;
  const Forest& forest() const { return forest_; }

 private:
  Forest forest_;
};

enum class GpMarginalization {
  kMomentMatching,  // SE only: GMRF conditional of the missing bins as input uncertainty
  kGibbs,           // Gibbs completions, mixture collapsed to one Gaussian
  kGibbsMixture,    // Gibbs completions, safety integrated over the mixture
};

/// One GP per configuration sharing a DEM prior for missing heights.
///
/// Moment matching uses the marginal variances of the GMRF conditional
/// (a diagonal input covariance).
class GpQpdf : public QpdfModel {
 public:
  GpQpdf(std::vector<GPModel> models, GmrfPrior prior, GpMarginalization mode, GibbsParams gibbs = {},
         std::uint64_t seed = 0);
  std::string name() const override;
  PerConfig<Qpdf> qpdfs(const StateVector& x) const override;
  PerConfig<double> means(const StateVector& x) const override;

  const std::vector<GPModel>& models() const { return models_; }
  const GmrfPrior& prior() const { return prior_; }
  GpMarginalization mode() const { return mode_; }

 private:
  std::vector<GPModel> models_;
  GmrfPrior prior_;
  GpMarginalization mode_;
  GibbsParams gibbs_;
  std::uint64_t seed_;
};

/// Fills missing DEM bins by lsq_interpolate() before asking `inner`.
class LsqQpdf : public QpdfModel {
 public:
  LsqQpdf(std::shared_ptr<const QpdfModel> inner, DemGeometry geometry);
  std::string name() const override { return "lsq+" + inner_->name(); }
  PerConfig<Qpdf> qpdfs(const StateVector& x) const override;
  PerConfig<double> means(const StateVector& x) const override;

  StateVector fill(const StateVector& x) const;

 private:
  std::shared_ptr<const QpdfModel> inner_;
  DemGeometry geometry_;
};

/// Q-learning targets for every transition of `data`, with the exact
/// tabular Q as the fitted model.
std::vector<QSample> dataset_q_samples(const Dataset& data, const QLearningParams& params);

/// Fully observed samples of each configuration as (X, q).
std::vector<ForestData> split_by_config(const std::vector<QSample>& samples);

Forest train_qpdf_forest(const std::vector<QSample>& samples, const ForestParams& params, std::uint64_t seed);

/// One GP per configuration; restart seeds derive from `seed` and the
/// configuration index.
std::vector<GPModel> train_qpdf_gps(const std::vector<QSample>& samples, KernelKind kind,
                                    const GpTrainParams& params, std::uint64_t seed);

/// A file holding one GP per configuration followed by the DEM prior.
void write_gp_bundle(std::ostream& out, const std::vector<GPModel>& models, const GmrfPrior& prior);
std::pair<std::vector<GPModel>, GmrfPrior> read_gp_bundle(std::istream& in);

}  // namespace trav

#endif  // TRAV_QPDF_MODEL_HPP
