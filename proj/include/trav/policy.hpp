#ifndef TRAV_POLICY_HPP
#define TRAV_POLICY_HPP

#include <variant>

#include "trav/dem.hpp"
#include "trav/gibbs.hpp"
#include "trav/gp.hpp"
#include "trav/histogram.hpp"
#include "trav/types.hpp"

namespace trav {

/// A QPDF as produced by any of the models.
using Qpdf = std::variant<QHistogram, GaussPred, GaussMixture>;

inline constexpr double kDefaultEpsilon = 0.8;

/// Probability that q >= 0. For histograms the bin straddling 0 is
/// pro-rated linearly.
double safety(const QHistogram& h);
double safety(const GaussPred& g);
double safety(const GaussMixture& m);
double safety(const Qpdf& qpdf);

/// Mean of the QPDF.
double expected_q(const QHistogram& h);
double expected_q(const GaussPred& g);
double expected_q(const GaussMixture& m);
double expected_q(const Qpdf& qpdf);

struct ChosenAction {
  FlipperConfig config = FlipperConfig::kVShape;
  double expected_q = 0.0;
  double safety = 0.0;
};

struct NoSafeAction {
  PerConfig<double> safety{};
};

using ActionDecision = std::variant<ChosenAction, NoSafeAction>;

/// Highest expected q among configurations with safety > epsilon (ties to
/// the lowest id); NoSafeAction when none qualifies.
ActionDecision select_action(const PerConfig<Qpdf>& qpdfs, double epsilon = kDefaultEpsilon);

/// Plain argmax of expected q, ties to the lowest id.
FlipperConfig select_unrestricted(const PerConfig<double>& expected);

/// Best safety over all configurations.
double best_safety(const PerConfig<Qpdf>& qpdfs);

/// Least-squares plane through the observed bins, used to fill the missing
/// ones. Observed heights are kept. With no observed bins the result is flat
/// at height 0. The result has no missing bins.
DEM lsq_interpolate(const DEM& dem);

}  // namespace trav

#endif  // TRAV_POLICY_HPP
