#include "gridtopo/metrics.hpp"

#include <string>

#include "gridtopo/error.hpp"

namespace gridtopo {

AccuracyReport compare(const AdjacencyMatrix& estimate, const AdjacencyMatrix& truth) {
  if (estimate.size() != truth.size()) {
    throw InvalidArgument("compare: " + std::to_string(estimate.size()) + "x" +
                          std::to_string(estimate.size()) + " estimate vs " +
                          std::to_string(truth.size()) + "x" + std::to_string(truth.size()) +
                          " truth");
  }
  const std::size_t n = truth.size();
  std::size_t predicted = 0;
  std::size_t actual = 0;
  std::size_t common = 0;
  std::size_t agree = 0;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool e = estimate.connected(i, j);
      const bool t = truth.connected(i, j);
      agree += e == t ? 1 : 0;
      if (j > i) {
        predicted += e ? 1 : 0;
        actual += t ? 1 : 0;
        common += e && t ? 1 : 0;
      }
    }
  }

  AccuracyReport r;
  r.recall = actual == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(actual);
  r.precision = predicted == 0 ? (actual == 0 ? 1.0 : 0.0)
                               : static_cast<double>(common) / static_cast<double>(predicted);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0
                                       : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  r.edge_accuracy = r.recall;
  const std::size_t off_diagonal = n * (n - (n == 0 ? 0 : 1));
  r.element_agreement =
      off_diagonal == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(off_diagonal);
  return r;
}

}  // namespace gridtopo
