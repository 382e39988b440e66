// Builds a query-driven partition tree on random points and runs one query.
#include <iostream>
#include <random>

#include "qdrs/qdrs.hpp"

int main() {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> coords(2000 * 2);
  for (double& c : coords) c = g(rng);
  qdrs::PointSet points(2, coords);

  qdrs::QuerySample sample;
  for (int j = 0; j < 4000; ++j)
    sample.queries.emplace_back(std::vector<double>{g(rng), g(rng)}, std::abs(g(rng)));

  auto tree = qdrs::build_query_driven_tree(points, sample, 4);
  qdrs::PartitionIndex index(tree, points);
  auto report = qdrs::query_exact(index, qdrs::BallRange({0.0, 0.0}, 0.5));
  std::cout << "points in range: " << report.result.size() << ", nodes visited: " << report.nodes_visited << "\n";
}
