#pragma once
// Categorical graph data model: one node type per node, one edge type per
// unordered pair, edge type 0 meaning "no edge". Dense one-hot views are
// produced on demand for the networks.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/random.hpp"

namespace graphrcg {

inline constexpr int kNoEdge = 0;

using EdgeTypeMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Edge {
  int i = 0;
  int j = 0;
  int type = 0;
  bool operator==(const Edge&) const = default;
};

class GraphSample {
 public:
  GraphSample() = default;

  // Validates every structural invariant; throws std::invalid_argument.
  GraphSample(int node_types, int edge_types, std::vector<int> nodes, EdgeTypeMatrix edges)
      : a_(node_types), b_(edge_types), nodes_(std::move(nodes)), edges_(std::move(edges)) {
    validate();
  }

  static GraphSample from_edges(int node_types, int edge_types, std::vector<int> nodes,
                                const std::vector<Edge>& edge_list) {
    const int n = static_cast<int>(nodes.size());
    EdgeTypeMatrix e = EdgeTypeMatrix::Zero(n, n);
    for (const auto& ed : edge_list) {
      if (ed.i < 0 || ed.j < 0 || ed.i >= n || ed.j >= n || ed.i == ed.j) {
        throw std::invalid_argument("edge endpoint out of range");
      }
      e(ed.i, ed.j) = ed.type;
      e(ed.j, ed.i) = ed.type;
    }
    return GraphSample(node_types, edge_types, std::move(nodes), std::move(e));
  }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int node_types() const { return a_; }
  int edge_types() const { return b_; }
  int node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  int edge(int i, int j) const { return edges_(i, j); }
  const std::vector<int>& nodes() const { return nodes_; }
  const EdgeTypeMatrix& edges() const { return edges_; }

  // Upper-triangle edges with type != no-edge, sorted by (i, j).
  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    for (int i = 0; i < num_nodes(); ++i) {
      for (int j = i + 1; j < num_nodes(); ++j) {
        if (edges_(i, j) != kNoEdge) out.push_back({i, j, edges_(i, j)});
      }
    }
    return out;
  }

  int num_edges() const { return static_cast<int>(edge_list().size()); }

  // n x a one-hot node matrix.
  ad::Matrix node_one_hot() const {
    ad::Matrix x = ad::Matrix::Zero(num_nodes(), a_);
    for (int i = 0; i < num_nodes(); ++i) x(i, nodes_[static_cast<std::size_t>(i)]) = 1.0;
    return x;
  }

  // (n*n) x b one-hot edge tensor; row i*n + j holds the fiber E[i, j, :].
  ad::Matrix edge_one_hot() const {
    const int n = num_nodes();
    ad::Matrix e = ad::Matrix::Zero(static_cast<ad::Index>(n) * n, b_);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) e(static_cast<ad::Index>(i) * n + j, edges_(i, j)) = 1.0;
    }
    return e;
  }

  // Node i of the result is node perm[i] of this graph.
  GraphSample permuted(const std::vector<int>& perm) const {
    const int n = num_nodes();
    if (static_cast<int>(perm.size()) != n) throw std::invalid_argument("permutation size mismatch");
    std::vector<int> nodes(static_cast<std::size_t>(n));
    EdgeTypeMatrix e(n, n);
    for (int i = 0; i < n; ++i) {
      nodes[static_cast<std::size_t>(i)] = nodes_[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      for (int j = 0; j < n; ++j) e(i, j) = edges_(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return GraphSample(a_, b_, std::move(nodes), std::move(e));
  }

  bool operator==(const GraphSample& o) const {
    return a_ == o.a_ && b_ == o.b_ && nodes_ == o.nodes_ && edges_ == o.edges_;
  }

 private:
  void validate() const {
    const int n = num_nodes();
    if (n < 1) throw std::invalid_argument("graph must have at least one node");
    if (a_ < 1) throw std::invalid_argument("node type count must be >= 1");
    if (b_ < 1) throw std::invalid_argument("edge type count must be >= 1");
    if (edges_.rows() != n || edges_.cols() != n) throw std::invalid_argument("edge matrix must be n x n");
    for (int v : nodes_) {
      if (v < 0 || v >= a_) throw std::invalid_argument("node type out of range");
    }
    for (int i = 0; i < n; ++i) {
      if (edges_(i, i) != kNoEdge) throw std::invalid_argument("self-loops are not allowed");
      for (int j = i + 1; j < n; ++j) {
        if (edges_(i, j) != edges_(j, i)) throw std::invalid_argument("edge tensor must be symmetric");
        if (edges_(i, j) < 0 || edges_(i, j) >= b_) throw std::invalid_argument("edge type out of range");
      }
    }
  }

  int a_ = 0;
  int b_ = 0;
  std::vector<int> nodes_;
  EdgeTypeMatrix edges_;
};

// Empirical type marginals p^X and p^E.
struct Marginals {
  Eigen::VectorXd node;
  Eigen::VectorXd edge;
};

// p^X over all nodes; p^E over the n(n-1)/2 unordered off-diagonal pairs.
inline Marginals compute_marginals(const std::vector<GraphSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("empty dataset");
  const int a = samples.front().node_types();
  const int b = samples.front().edge_types();
  Eigen::VectorXd nx = Eigen::VectorXd::Zero(a);
  Eigen::VectorXd ne = Eigen::VectorXd::Zero(b);
  for (const auto& g : samples) {
    if (g.node_types() != a || g.edge_types() != b) throw std::invalid_argument("heterogeneous type vocabulary");
    for (int v : g.nodes()) nx(v) += 1.0;
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int j = i + 1; j < g.num_nodes(); ++j) ne(g.edge(i, j)) += 1.0;
    }
  }
  Marginals m;
  m.node = nx / nx.sum();
  if (ne.sum() > 0.0) {
    m.edge = ne / ne.sum();
  } else {
    m.edge = Eigen::VectorXd::Zero(b);
    m.edge(kNoEdge) = 1.0;
  }
  return m;
}

// Everything the sampler needs to know about the training corpus.
struct DatasetStats {
  int node_types = 0;
  int edge_types = 0;
  Marginals marginals;
  std::map<int, double> size_histogram;
};

class GraphDataset {
 public:
  GraphDataset() = default;
  explicit GraphDataset(std::vector<GraphSample> samples) : samples_(std::move(samples)) {
    const Marginals m = compute_marginals(samples_);
    stats_.node_types = samples_.front().node_types();
    stats_.edge_types = samples_.front().edge_types();
    stats_.marginals = m;
    std::map<int, double> counts;
    for (const auto& g : samples_) counts[g.num_nodes()] += 1.0;
    for (auto& [n, c] : counts) c /= static_cast<double>(samples_.size());
    stats_.size_histogram = std::move(counts);
  }

  const std::vector<GraphSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const GraphSample& operator[](std::size_t i) const { return samples_[i]; }
  const DatasetStats& stats() const { return stats_; }
  int node_types() const { return stats_.node_types; }
  int edge_types() const { return stats_.edge_types; }
  const Marginals& marginals() const { return stats_.marginals; }
  const std::map<int, double>& size_histogram() const { return stats_.size_histogram; }

 private:
  std::vector<GraphSample> samples_;
  DatasetStats stats_;
};

inline int sample_graph_size(const std::map<int, double>& histogram, Engine& rng) {
  if (histogram.empty()) throw std::invalid_argument("empty size histogram");
  Eigen::VectorXd w(static_cast<Eigen::Index>(histogram.size()));
  std::vector<int> sizes;
  for (const auto& [n, p] : histogram) {
    w(static_cast<Eigen::Index>(sizes.size())) = p;
    sizes.push_back(n);
  }
  return sizes[static_cast<std::size_t>(sample_categorical(w, rng))];
}

inline int sample_graph_size(const GraphDataset& dataset, std::uint64_t seed) {
  Engine rng(seed);
  return sample_graph_size(dataset.size_histogram(), rng);
}

// Seeded partition into (train, test); `train_fraction` of graphs go to train.
inline std::pair<std::vector<GraphSample>, std::vector<GraphSample>> split_samples(
    const std::vector<GraphSample>& samples, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Engine rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
  std::pair<std::vector<GraphSample>, std::vector<GraphSample>> out;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (k < cut ? out.first : out.second).push_back(samples[idx[k]]);
  }
  return out;
}

}  // namespace graphrcg
