#include "trav/histogram.hpp"

#include <algorithm>

namespace trav {

void QHistogram::normalize() {
  const double total = mass.sum();
  if (!(total > 0.0)) throw DataError("cannot normalize an empty histogram");
  mass /= total;
}

Vector uniform_edges(double lo, double hi, int bins, double pad) {
  if (bins < 1) throw ParameterError("histogram needs at least one bin");
  if (!(hi >= lo)) throw ParameterError("histogram range is inverted");
  if (hi - lo <= 0.0) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double span = hi - lo;
  return Vector::LinSpaced(bins + 1, lo - pad * span, hi + pad * span);
}

int bin_of(const Vector& edges, double q) {
  const int bins = static_cast<int>(edges.size()) - 1;
  auto it = std::upper_bound(edges.data(), edges.data() + edges.size(), q);
  const int b = static_cast<int>(it - edges.data()) - 1;
  return std::clamp(b, 0, bins - 1);
}

QHistogram histogram_of(const Vector& edges, std::span<const double> q,
                        std::span<const double> weights) {
  QHistogram h{edges, Vector::Zero(edges.size() - 1)};
  for (std::size_t i = 0; i < q.size(); ++i) {
    h.mass[bin_of(edges, q[i])] += weights.empty() ? 1.0 : weights[i];
  }
  h.normalize();
  return h;
}

}  // namespace trav
