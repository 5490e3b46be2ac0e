#include "trav/policy.hpp"

#include <cmath>

namespace trav {

double safety(const QHistogram& h) {
  double above = 0.0;
  double below = 0.0;
  for (int b = 0; b < h.bins(); ++b) {
    const double lo = h.edges[b];
    const double hi = h.edges[b + 1];
    const double m = h.mass[b];
    if (lo >= 0.0) {
      above += m;
    } else if (hi <= 0.0) {
      below += m;
    } else {
      const double frac = hi / (hi - lo);
      above += m * frac;
      below += m * (1.0 - frac);
    }
  }
  const double total = above + below;
  if (!(total > 0.0)) throw ParameterError("safety of an empty histogram");
  return above / total;
}

double safety(const GaussPred& g) {
  if (g.variance <= 0.0) return g.mean >= 0.0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-g.mean / std::sqrt(2.0 * g.variance));
}

double safety(const GaussMixture& m) {
  if (m.components.empty()) throw ParameterError("safety of an empty mixture");
  double s = 0.0;
  for (const GaussPred& g : m.components) s += safety(g);
  return s / static_cast<double>(m.components.size());
}

double safety(const Qpdf& qpdf) {
  return std::visit([](const auto& q) { return safety(q); }, qpdf);
}

double expected_q(const QHistogram& h) {
  double e = 0.0;
  for (int b = 0; b < h.bins(); ++b) e += h.center(b) * h.mass[b];
  return e;
}

double expected_q(const GaussPred& g) { return g.mean; }

double expected_q(const GaussMixture& m) { return collapse(m).mean; }

double expected_q(const Qpdf& qpdf) {
  return std::visit([](const auto& q) { return expected_q(q); }, qpdf);
}

ActionDecision select_action(const PerConfig<Qpdf>& qpdfs, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon must lie in [0, 1]");
  NoSafeAction none;
  std::optional<ChosenAction> best;
  for (int i = 0; i < kNumConfigs; ++i) {
    const double s = safety(qpdfs[i]);
    none.safety[i] = s;
    if (!(s > epsilon)) continue;
    const double e = expected_q(qpdfs[i]);
    if (!best || e > best->expected_q) best = ChosenAction{config_from_index(i), e, s};
  }
  if (best) return *best;
  return none;
}

FlipperConfig select_unrestricted(const PerConfig<double>& expected) {
  int best = 0;
  for (int i = 1; i < kNumConfigs; ++i) {
    if (expected[i] > expected[best]) best = i;
  }
  return config_from_index(best);
}

double best_safety(const PerConfig<Qpdf>& qpdfs) {
  double best = 0.0;
  for (const Qpdf& q : qpdfs) best = std::max(best, safety(q));
  return best;
}

DEM lsq_interpolate(const DEM& dem) {
  DEM out = dem;
  out.missing.setConstant(false);
  const int n_obs = dem.bins() - dem.missing_count();
  if (n_obs == dem.bins()) return out;
  if (n_obs == 0) {
    out.heights.setZero();
    return out;
  }
  double r_mean = 0.0;
  double c_mean = 0.0;
  for (int r = 0; r < dem.rows(); ++r) {
    for (int c = 0; c < dem.cols(); ++c) {
      if (dem.missing(r, c)) continue;
      r_mean += r;
      c_mean += c;
    }
  }
  r_mean /= n_obs;
  c_mean /= n_obs;
  Matrix A(n_obs, 3);
  Vector h(n_obs);
  int k = 0;
  for (int r = 0; r < dem.rows(); ++r) {
    for (int c = 0; c < dem.cols(); ++c) {
      if (dem.missing(r, c)) continue;
      A.row(k) << 1.0, r - r_mean, c - c_mean;
      h[k] = dem.heights(r, c);
      ++k;
    }
  }
  const Vector coef = A.completeOrthogonalDecomposition().solve(h);
  for (int r = 0; r < dem.rows(); ++r) {
    for (int c = 0; c < dem.cols(); ++c) {
      if (!dem.missing(r, c)) continue;
      out.heights(r, c) = coef[0] + coef[1] * (r - r_mean) + coef[2] * (c - c_mean);
    }
  }
  return out;
}

}  // namespace trav
