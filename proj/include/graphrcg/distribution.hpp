#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/graph.hpp"

namespace graphrcg {

// Per-node (n x a) and per-pair ((n*n) x b, row i*n + j) categorical
// distributions.
struct DistributionPair {
  ad::Matrix node;
  ad::Matrix edge;

  int num_nodes() const { return static_cast<int>(node.rows()); }

  // Throws std::logic_error when a row leaves the simplex, edges are
  // asymmetric, or a diagonal fiber is not one-hot at "no edge".
  void validate(double tol = 1e-6) const {
    const int n = num_nodes();
    if (edge.rows() != static_cast<ad::Index>(n) * n) throw std::logic_error("edge distribution shape mismatch");
    auto check_row = [tol](const auto& row) {
      if ((row.array() < -tol).any() || std::abs(row.sum() - 1.0) > tol) {
        throw std::logic_error("distribution row off the simplex");
      }
    };
    for (ad::Index i = 0; i < node.rows(); ++i) check_row(node.row(i));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const auto r = edge.row(static_cast<ad::Index>(i) * n + j);
        check_row(r);
        if (i == j) {
          if (std::abs(r(kNoEdge) - 1.0) > tol) throw std::logic_error("diagonal fiber must be no-edge");
        } else if ((r - edge.row(static_cast<ad::Index>(j) * n + i)).cwiseAbs().maxCoeff() > tol) {
          throw std::logic_error("edge distribution must be symmetric");
        }
      }
    }
  }

  // Most likely type per node and per unordered pair.
  GraphSample argmax(int node_types, int edge_types) const {
    const int n = num_nodes();
    std::vector<int> nodes(static_cast<std::size_t>(n));
    EdgeTypeMatrix e = EdgeTypeMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      ad::Index k;
      node.row(i).maxCoeff(&k);
      nodes[static_cast<std::size_t>(i)] = static_cast<int>(k);
      for (int j = i + 1; j < n; ++j) {
        edge.row(static_cast<ad::Index>(i) * n + j).maxCoeff(&k);
        e(i, j) = e(j, i) = static_cast<int>(k);
      }
    }
    return GraphSample(node_types, edge_types, std::move(nodes), std::move(e));
  }
};

}  // namespace graphrcg
