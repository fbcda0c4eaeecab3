#pragma once
// Shared fixed graph corpus and brute-force oracles for structure metrics.

#include <algorithm>
#include <array>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "graphrcg/datasets.hpp"
#include "graphrcg/graph.hpp"
#include "graphrcg/random.hpp"

namespace graphrcg::testing {

// Deterministic mix of random, structured, SBM and planar graphs (n <= 12).
inline std::vector<GraphSample> metric_corpus() {
  std::vector<GraphSample> out;
  Engine rng(20240611);
  auto unl = [](int n, const std::vector<Edge>& e) {
    return GraphSample::from_edges(1, 2, std::vector<int>(static_cast<std::size_t>(n), 0), e);
  };
  for (int k = 0; k < 40; ++k) {
    const int n = 1 + k % 10;
    const double p = 0.15 + 0.7 * uniform01(rng);
    std::vector<Edge> e;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (uniform01(rng) < p) e.push_back({i, j, 1});
      }
    }
    out.push_back(unl(n, e));
  }
  for (int n = 4; n <= 8; ++n) {
    std::vector<Edge> cycle, star, clique;
    for (int i = 0; i < n; ++i) cycle.push_back({std::min(i, (i + 1) % n), std::max(i, (i + 1) % n), 1});
    for (int i = 1; i < n; ++i) star.push_back({0, i, 1});
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) clique.push_back({i, j, 1});
    }
    out.push_back(unl(n, cycle));
    out.push_back(unl(n, star));
    out.push_back(unl(n, clique));
  }
  SbmConfig sbm;
  sbm.min_communities = sbm.max_communities = 2;
  sbm.min_community_size = 3;
  sbm.max_community_size = 5;
  sbm.intra_prob = 0.7;
  sbm.inter_prob = 0.1;
  for (int k = 0; k < 6; ++k) out.push_back(generate_sbm_graph(sbm, static_cast<std::uint64_t>(k)).graph);
  for (int n = 6; n <= 12; ++n) out.push_back(generate_planar_graph(n, static_cast<std::uint64_t>(n)));
  return out;
}

// Per-node counts of orbits 4..14 by testing every 4-subset against labelled
// templates under all 24 vertex orders.
inline Eigen::MatrixXd brute_force_orbits(const GraphSample& g) {
  struct Template {
    std::vector<std::pair<int, int>> edges;
    std::array<int, 4> orbit;
  };
  const std::vector<Template> templates{
      {{{0, 1}, {1, 2}, {2, 3}}, {4, 5, 5, 4}},
      {{{0, 1}, {0, 2}, {0, 3}}, {7, 6, 6, 6}},
      {{{0, 1}, {1, 2}, {2, 3}, {3, 0}}, {8, 8, 8, 8}},
      {{{0, 1}, {1, 2}, {2, 0}, {0, 3}}, {11, 10, 10, 9}},
      {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}}, {13, 13, 12, 12}},
      {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, {14, 14, 14, 14}},
  };
  const int n = g.num_nodes();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, 11);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int c = b + 1; c < n; ++c) {
        for (int d = c + 1; d < n; ++d) {
          std::array<int, 4> s{a, b, c, d};
          bool matched = false;
          for (const Template& t : templates) {
            std::array<int, 4> perm{0, 1, 2, 3};
            do {
              bool adj[4][4] = {};
              for (auto [x, y] : t.edges) adj[x][y] = adj[y][x] = true;
              bool same = true;
              for (int x = 0; x < 4 && same; ++x) {
                for (int y = x + 1; y < 4 && same; ++y) {
                  const bool e = g.edge(s[static_cast<std::size_t>(perm[static_cast<std::size_t>(x)])],
                                        s[static_cast<std::size_t>(perm[static_cast<std::size_t>(y)])]) != kNoEdge;
                  same = e == adj[x][y];
                }
              }
              if (same) {
                for (int x = 0; x < 4; ++x) {
                  counts(s[static_cast<std::size_t>(perm[static_cast<std::size_t>(x)])],
                         t.orbit[static_cast<std::size_t>(x)] - 4) += 1.0;
                }
                matched = true;
              }
            } while (!matched && std::next_permutation(perm.begin(), perm.end()));
            if (matched) break;
          }
        }
      }
    }
  }
  return counts;
}

// Tries every node permutation.
inline bool brute_force_isomorphic(const GraphSample& a, const GraphSample& b) {
  if (a.num_nodes() != b.num_nodes()) return false;
  const int n = a.num_nodes();
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  do {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      ok = a.node(i) == b.node(p[static_cast<std::size_t>(i)]);
      for (int j = 0; j < n && ok; ++j) ok = a.edge(i, j) == b.edge(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
    }
    if (ok) return true;
  } while (std::next_permutation(p.begin(), p.end()));
  return false;
}

}  // namespace graphrcg::testing
