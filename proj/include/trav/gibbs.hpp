#ifndef TRAV_GIBBS_HPP
#define TRAV_GIBBS_HPP

#include <cstdint>
#include <vector>

#include "trav/gp.hpp"
#include "trav/types.hpp"

namespace trav {

/// Gaussian Markov random field over the DEM block:
///   log p(h) = -kappa/2 sum over 4-neighbor pairs (h_a - h_b)^2
///              - tau/2 sum_a (h_a - anchor_a)^2 + const.
/// kappa = +inf pins every free bin to the average of its neighbors.
struct GmrfPrior {
  StateLayout layout;
  double neighbor_precision = 1.0;  // kappa
  double anchor_precision = 1.0;    // tau
  Vector anchor_mean;               // one per DEM bin

  void validate() const;
};

/// kappa from the empirical variance of 4-neighbor height differences,
/// tau from the variance of heights about their per-bin means. Only
/// observed entries of `states` are used.
GmrfPrior fit_gmrf_prior(const std::vector<StateVector>& states, const StateLayout& layout);

/// Exact conditional of the missing heights of `x` given its observed ones.
/// Requires a finite neighbor precision.
struct MissingConditional {
  std::vector<int> bins;  // DEM bin indices, ascending
  Vector mean;
  Matrix cov;
};
MissingConditional gmrf_conditional(const GmrfPrior& prior, const StateVector& x);

/// Equal-weight mixture of Gaussians.
struct GaussMixture {
  std::vector<GaussPred> components;
};

/// Single Gaussian with the mixture's mean and variance.
GaussPred collapse(const GaussMixture& mixture);

struct GibbsParams {
  int n_samples = 100;
  int burn_in = 20;
};

/// Completed copies of `x` (one per row, no NaN), drawn by a Gibbs chain
/// over the missing DEM bins in ascending bin order. The chain starts from
/// the anchor means. Deterministic in `seed`.
Matrix gibbs_completions(const StateVector& x, const GmrfPrior& prior, const GibbsParams& params,
                         std::uint64_t seed);

/// predict() on every completion.
GaussMixture gibbs_mixture(const GPModel& model, const StateVector& x, const GmrfPrior& prior,
                           const GibbsParams& params, std::uint64_t seed);

/// Moment-collapsed gibbs_mixture(); plain predict() when nothing is
/// missing. Missing proprioceptive entries are a ParameterError.
GaussPred gibbs_marginalize(const GPModel& model, const StateVector& x, const GmrfPrior& prior,
                            const GibbsParams& params, std::uint64_t seed);

}  // namespace trav

#endif  // TRAV_GIBBS_HPP
