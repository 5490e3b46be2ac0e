#ifndef TRAV_HISTOGRAM_HPP
#define TRAV_HISTOGRAM_HPP

#include <span>

#include "trav/types.hpp"

namespace trav {

/// Discretized density over q-values. `mass` sums to one once normalized.
struct QHistogram {
  Vector edges;  // B + 1, strictly ascending
  Vector mass;   // B, non-negative

  int bins() const { return static_cast<int>(mass.size()); }
  double center(int b) const { return 0.5 * (edges[b] + edges[b + 1]); }
  void normalize();
};

/// `bins` uniform bins over [lo, hi] widened by `pad` of the span on each
/// side. A degenerate range is widened to unit span first.
Vector uniform_edges(double lo, double hi, int bins, double pad);

/// Bin of `q`; values outside the edges fall into the first or last bin.
int bin_of(const Vector& edges, double q);

/// Weighted histogram of `q` over `edges`, normalized.
QHistogram histogram_of(const Vector& edges, std::span<const double> q,
                        std::span<const double> weights = {});

}  // namespace trav

#endif  // TRAV_HISTOGRAM_HPP
