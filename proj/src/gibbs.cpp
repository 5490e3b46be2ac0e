#include "trav/gibbs.hpp"

#include <cmath>
#include <random>

namespace trav {

namespace {

std::vector<std::vector<int>> neighbors(const StateLayout& layout) {
  std::vector<std::vector<int>> nb(layout.bins());
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const int b = r * layout.cols + c;
      if (r > 0) nb[b].push_back(b - layout.cols);
      if (c > 0) nb[b].push_back(b - 1);
      if (c + 1 < layout.cols) nb[b].push_back(b + 1);
      if (r + 1 < layout.rows) nb[b].push_back(b + layout.cols);
    }
  }
  return nb;
}

void check_state(const GmrfPrior& prior, const StateVector& x) {
  const StateLayout& L = prior.layout;
  if (x.size() != L.dim() || x.missing.size() != L.dim()) {
    throw ParameterError("state does not match the prior's layout");
  }
  if (x.missing.head(L.proprio_dim).any()) {
    throw ParameterError("only DEM entries may be missing for Gibbs marginalization");
  }
}

}  // namespace

void GmrfPrior::validate() const {
  if (anchor_mean.size() != layout.bins()) throw ParameterError("anchor means do not cover the DEM");
  if (!(neighbor_precision >= 0.0) || !(anchor_precision >= 0.0) || std::isinf(anchor_precision)) {
    throw ParameterError("invalid GMRF precisions");
  }
}

GmrfPrior fit_gmrf_prior(const std::vector<StateVector>& states, const StateLayout& layout) {
  if (states.empty()) throw ParameterError("no states to fit the DEM prior");
  const int bins = layout.bins();
  Vector sum = Vector::Zero(bins);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(bins);
  double diff_sq = 0.0;
  long diff_n = 0;
  for (const StateVector& x : states) {
    if (x.size() != layout.dim()) throw ParameterError("state does not match the layout");
    for (int r = 0; r < layout.rows; ++r) {
      for (int c = 0; c < layout.cols; ++c) {
        const int b = r * layout.cols + c;
        const int f = layout.feature_of_bin(b);
        if (x.missing[f]) continue;
        sum[b] += x.values[f];
        ++count[b];
        for (int nbr : {c + 1 < layout.cols ? b + 1 : -1, r + 1 < layout.rows ? b + layout.cols : -1}) {
          if (nbr < 0) continue;
          const int g = layout.feature_of_bin(nbr);
          if (x.missing[g]) continue;
          const double d = x.values[f] - x.values[g];
          diff_sq += d * d;
          ++diff_n;
        }
      }
    }
  }
  GmrfPrior prior;
  prior.layout = layout;
  prior.anchor_mean = Vector::Zero(bins);
  for (int b = 0; b < bins; ++b) {
    if (count[b] > 0) prior.anchor_mean[b] = sum[b] / count[b];
  }
  double dev_sq = 0.0;
  long dev_n = 0;
  for (const StateVector& x : states) {
    for (int b = 0; b < bins; ++b) {
      const int f = layout.feature_of_bin(b);
      if (x.missing[f]) continue;
      const double d = x.values[f] - prior.anchor_mean[b];
      dev_sq += d * d;
      ++dev_n;
    }
  }
  const double var_diff = diff_n > 0 ? diff_sq / static_cast<double>(diff_n) : 0.0;
  const double var_h = dev_n > 0 ? dev_sq / static_cast<double>(dev_n) : 0.0;
  prior.neighbor_precision = var_diff > 0.0 ? 1.0 / var_diff : std::numeric_limits<double>::infinity();
  prior.anchor_precision = 1.0 / std::max(var_h, 1e-12);
  return prior;
}

MissingConditional gmrf_conditional(const GmrfPrior& prior, const StateVector& x) {
  prior.validate();
  check_state(prior, x);
  if (std::isinf(prior.neighbor_precision)) {
    throw ParameterError("closed-form conditional needs a finite neighbor precision");
  }
  const StateLayout& L = prior.layout;
  const auto nb = neighbors(L);
  MissingConditional out;
  std::vector<int> slot(L.bins(), -1);
  for (int b = 0; b < L.bins(); ++b) {
    if (x.missing[L.feature_of_bin(b)]) {
      slot[b] = static_cast<int>(out.bins.size());
      out.bins.push_back(b);
    }
  }
  const int k = static_cast<int>(out.bins.size());
  const double kappa = prior.neighbor_precision;
  const double tau = prior.anchor_precision;
  Matrix P = Matrix::Zero(k, k);
  Vector rhs = Vector::Zero(k);
  for (int i = 0; i < k; ++i) {
    const int b = out.bins[i];
    P(i, i) = kappa * static_cast<double>(nb[b].size()) + tau;
    rhs[i] = tau * prior.anchor_mean[b];
    for (int n : nb[b]) {
      if (slot[n] >= 0) {
        P(i, slot[n]) -= kappa;
      } else {
        rhs[i] += kappa * x.values[L.feature_of_bin(n)];
      }
    }
  }
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) throw ParameterError("DEM prior is improper for this mask");
  out.mean = llt.solve(rhs);
  out.cov = llt.solve(Matrix::Identity(k, k));
  return out;
}

GaussPred collapse(const GaussMixture& mixture) {
  if (mixture.components.empty()) throw ParameterError("empty mixture");
  const double n = static_cast<double>(mixture.components.size());
  double mean = 0.0;
  for (const GaussPred& g : mixture.components) mean += g.mean;
  mean /= n;
  double var = 0.0;
  for (const GaussPred& g : mixture.components) {
    var += g.variance + (g.mean - mean) * (g.mean - mean);
  }
  return {mean, var / n};
}

Matrix gibbs_completions(const StateVector& x, const GmrfPrior& prior, const GibbsParams& params,
                         std::uint64_t seed) {
  prior.validate();
  check_state(prior, x);
  if (params.n_samples < 1 || params.burn_in < 0) throw ParameterError("invalid Gibbs sample counts");
  const StateLayout& L = prior.layout;
  const auto nb = neighbors(L);
  std::vector<int> free;
  Vector h(L.bins());
  for (int b = 0; b < L.bins(); ++b) {
    const int f = L.feature_of_bin(b);
    if (x.missing[f]) {
      free.push_back(b);
      h[b] = prior.anchor_mean[b];
    } else {
      h[b] = x.values[f];
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double kappa = prior.neighbor_precision;
  const double tau = prior.anchor_precision;
  Matrix out(params.n_samples, L.dim());
  Vector row = x.values;
  for (int sweep = 0, kept = 0; kept < params.n_samples; ++sweep) {
    for (int b : free) {
      double nsum = 0.0;
      for (int n : nb[b]) nsum += h[n];
      const double cnt = static_cast<double>(nb[b].size());
      if (std::isinf(kappa) && cnt > 0) {
        h[b] = nsum / cnt;
        continue;
      }
      const double prec = kappa * cnt + tau;
      if (!(prec > 0.0)) throw ParameterError("DEM prior is improper for this mask");
      const double mean = (kappa * nsum + tau * prior.anchor_mean[b]) / prec;
      h[b] = mean + normal(rng) / std::sqrt(prec);
    }
    if (sweep < params.burn_in) continue;
    for (int b : free) row[L.feature_of_bin(b)] = h[b];
    out.row(kept++) = row.transpose();
  }
  return out;
}

GaussMixture gibbs_mixture(const GPModel& model, const StateVector& x, const GmrfPrior& prior,
                           const GibbsParams& params, std::uint64_t seed) {
  GaussMixture mix;
  if (!x.any_missing()) {
    mix.components.push_back(predict(model, x.values));
    return mix;
  }
  const Matrix samples = gibbs_completions(x, prior, params, seed);
  mix.components.reserve(samples.rows());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    mix.components.push_back(predict(model, samples.row(i).transpose()));
  }
  return mix;
}

GaussPred gibbs_marginalize(const GPModel& model, const StateVector& x, const GmrfPrior& prior,
                            const GibbsParams& params, std::uint64_t seed) {
  if (!x.any_missing()) return predict(model, x.values);
  return collapse(gibbs_mixture(model, x, prior, params, seed));
}

}  // namespace trav
