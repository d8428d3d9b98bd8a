#pragma once

#include <chrono>

#include "gridtopo/topology.hpp"

namespace gridtopo {

// Agreement between an estimated and a true adjacency matrix. Edge sets are
// read from the upper triangles. With no true edges, edge_accuracy and
// recall are 1; with no predicted edges, precision is 1 only if the truth is
// also empty.
struct AccuracyReport {
  double edge_accuracy = 0.0;  // |E_pred ∩ E_true| / |E_true|
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double element_agreement = 0.0;  // matching off-diagonal entries
  double wall_time = 0.0;          // seconds, filled by the caller
};

// Throws InvalidArgument on a dimension mismatch.
AccuracyReport compare(const AdjacencyMatrix& estimate, const AdjacencyMatrix& truth);

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace gridtopo
