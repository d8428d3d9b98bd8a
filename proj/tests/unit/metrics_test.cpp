#include <gtest/gtest.h>

#include "gridtopo/error.hpp"
#include "gridtopo/metrics.hpp"

using namespace gridtopo;

TEST(Compare, PerfectEstimate) {
  const Topology t = random_radial_topology(13, 4, 2);
  const auto r = compare(adjacency_matrix(t), adjacency_matrix(t));
  EXPECT_EQ(r.edge_accuracy, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.element_agreement, 1.0);
}

TEST(Compare, PartialEstimate) {
  AdjacencyMatrix truth(4);
  truth.connect(0, 1);
  truth.connect(0, 2);
  truth.connect(2, 3);
  AdjacencyMatrix est(4);
  est.connect(0, 1);
  est.connect(1, 3);
  const auto r = compare(est, truth);
  EXPECT_DOUBLE_EQ(r.edge_accuracy, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.4);
  // 12 off-diagonal cells; (1,3), (0,2), (2,3) differ in both directions.
  EXPECT_DOUBLE_EQ(r.element_agreement, 6.0 / 12.0);
}

TEST(Compare, EmptyEdgeSets) {
  const AdjacencyMatrix none(3);
  const auto both_empty = compare(none, none);
  EXPECT_EQ(both_empty.edge_accuracy, 1.0);
  EXPECT_EQ(both_empty.precision, 1.0);

  AdjacencyMatrix truth(3);
  truth.connect(0, 1);
  const auto nothing_found = compare(none, truth);
  EXPECT_EQ(nothing_found.edge_accuracy, 0.0);
  EXPECT_EQ(nothing_found.precision, 0.0);
  EXPECT_EQ(nothing_found.f1, 0.0);
}

TEST(Compare, SingleNode) {
  const auto r = compare(AdjacencyMatrix(1), AdjacencyMatrix(1));
  EXPECT_EQ(r.edge_accuracy, 1.0);
  EXPECT_EQ(r.element_agreement, 1.0);
}

TEST(Compare, SizeMismatchThrows) {
  EXPECT_THROW(compare(AdjacencyMatrix(3), AdjacencyMatrix(4)), InvalidArgument);
}

TEST(Stopwatch, Monotonic) {
  const Stopwatch w;
  const double a = w.seconds();
  EXPECT_GE(w.seconds(), a);
  EXPECT_GE(a, 0.0);
}
