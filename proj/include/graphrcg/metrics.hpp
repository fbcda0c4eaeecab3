#pragma once
// Structure statistics and MMD between graph sets, plus valency-based
// validity and uniqueness. Edges are binarized as type != 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "graphrcg/graph.hpp"
#include "graphrcg/isomorphism.hpp"

namespace graphrcg {

using Descriptor = Eigen::VectorXd;

inline std::vector<std::vector<int>> adjacency_lists(const GraphSample& g) {
  const int n = g.num_nodes();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && g.edge(i, j) != kNoEdge) adj[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  return adj;
}

// Counts per degree 0..max degree.
inline Descriptor degree_descriptor(const GraphSample& g) {
  const auto adj = adjacency_lists(g);
  std::size_t max_deg = 0;
  for (const auto& a : adj) max_deg = std::max(max_deg, a.size());
  Descriptor h = Descriptor::Zero(static_cast<Eigen::Index>(max_deg) + 1);
  for (const auto& a : adj) h(static_cast<Eigen::Index>(a.size())) += 1.0;
  return h;
}

inline std::vector<double> clustering_coefficients(const GraphSample& g) {
  const auto adj = adjacency_lists(g);
  std::vector<double> c(adj.size(), 0.0);
  for (std::size_t i = 0; i < adj.size(); ++i) {
    const auto& nb = adj[i];
    const double d = static_cast<double>(nb.size());
    if (nb.size() < 2) continue;
    double links = 0.0;
    for (std::size_t x = 0; x < nb.size(); ++x) {
      for (std::size_t y = x + 1; y < nb.size(); ++y) links += g.edge(nb[x], nb[y]) != kNoEdge;
    }
    c[i] = 2.0 * links / (d * (d - 1.0));
  }
  return c;
}

// Value counts over `bins` equal bins on [lo, hi]; hi falls in the last bin.
inline Descriptor histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  Descriptor h = Descriptor::Zero(bins);
  for (double v : values) {
    int k = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    k = std::clamp(k, 0, bins - 1);
    h(k) += 1.0;
  }
  return h;
}

inline Descriptor clustering_descriptor(const GraphSample& g, int bins = 100) {
  return histogram(clustering_coefficients(g), bins, 0.0, 1.0);
}

// Eigenvalues of I - D^-1/2 A D^-1/2 (isolated nodes contribute 1).
inline Eigen::VectorXd normalized_laplacian_spectrum(const GraphSample& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = (i != j && g.edge(i, j) != kNoEdge) ? 1.0 : 0.0;
  }
  const Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  const Eigen::MatrixXd lap =
      Eigen::MatrixXd::Identity(n, n) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

inline Descriptor spectral_descriptor(const GraphSample& g, int bins = 200) {
  const Eigen::VectorXd ev = normalized_laplacian_spectrum(g);
  return histogram(std::vector<double>(ev.data(), ev.data() + ev.size()), bins, 0.0, 2.0);
}

// Orbits of connected 4-node graphlets, in the usual numbering:
//   path        4 end, 5 middle
//   star        6 leaf, 7 centre
//   cycle       8
//   paw         9 pendant, 10 triangle rim, 11 centre
//   diamond     12 rim (degree 2), 13 chord ends (degree 3)
//   clique      14
inline constexpr int kFirstFourNodeOrbit = 4;
inline constexpr int kFourNodeOrbits = 11;

// Orbit of every node of a connected 4-node induced subgraph, given the
// within-subgraph degrees and edge count.
inline std::array<int, 4> classify_four_node_orbits(const std::array<int, 4>& deg, int edges) {
  std::array<int, 4> orbit{};
  for (int k = 0; k < 4; ++k) {
    const int d = deg[static_cast<std::size_t>(k)];
    int o = -1;
    switch (edges) {
      case 3: {
        const bool star = *std::max_element(deg.begin(), deg.end()) == 3;
        o = star ? (d == 3 ? 7 : 6) : (d == 1 ? 4 : 5);
        break;
      }
      case 4: {
        const bool cycle = *std::max_element(deg.begin(), deg.end()) == 2;
        o = cycle ? 8 : (d == 1 ? 9 : (d == 2 ? 10 : 11));
        break;
      }
      case 5: o = d == 2 ? 12 : 13; break;
      case 6: o = 14; break;
      default: throw std::logic_error("not a connected 4-node graphlet");
    }
    orbit[static_cast<std::size_t>(k)] = o;
  }
  return orbit;
}

// Per-node orbit counts (n x 11) from an enumeration of connected 4-node
// induced subgraphs that grows sets along edges (each set found once, from its
// smallest node, extending only with larger-labelled exclusive neighbours).
inline Eigen::MatrixXd node_orbit_counts(const GraphSample& g) {
  const int n = g.num_nodes();
  const auto adj = adjacency_lists(g);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, kFourNodeOrbits);
  auto record = [&](const std::vector<int>& s) {
    std::array<int, 4> deg{};
    int edges = 0;
    for (int x = 0; x < 4; ++x) {
      for (int y = x + 1; y < 4; ++y) {
        if (g.edge(s[static_cast<std::size_t>(x)], s[static_cast<std::size_t>(y)]) != kNoEdge) {
          ++deg[static_cast<std::size_t>(x)];
          ++deg[static_cast<std::size_t>(y)];
          ++edges;
        }
      }
    }
    const auto orbit = classify_four_node_orbits(deg, edges);
    for (int x = 0; x < 4; ++x) {
      counts(s[static_cast<std::size_t>(x)], orbit[static_cast<std::size_t>(x)] - kFirstFourNodeOrbit) += 1.0;
    }
  };
  // ESU enumeration.
  std::vector<int> sub;
  std::vector<char> in_sub(static_cast<std::size_t>(n), 0), in_nbhd(static_cast<std::size_t>(n), 0);
  std::function<void(std::vector<int>, int)> extend = [&](std::vector<int> ext, int root) {
    if (sub.size() == 4) {
      record(sub);
      return;
    }
    while (!ext.empty()) {
      const int w = ext.back();
      ext.pop_back();
      std::vector<int> next = ext;
      std::vector<int> added;
      for (int u : adj[static_cast<std::size_t>(w)]) {
        if (u > root && !in_sub[static_cast<std::size_t>(u)] && !in_nbhd[static_cast<std::size_t>(u)]) {
          next.push_back(u);
          added.push_back(u);
          in_nbhd[static_cast<std::size_t>(u)] = 1;
        }
      }
      sub.push_back(w);
      in_sub[static_cast<std::size_t>(w)] = 1;
      extend(next, root);
      in_sub[static_cast<std::size_t>(w)] = 0;
      sub.pop_back();
      for (int u : added) in_nbhd[static_cast<std::size_t>(u)] = 0;
    }
  };
  for (int v = 0; v < n; ++v) {
    std::vector<int> ext;
    sub = {v};
    in_sub[static_cast<std::size_t>(v)] = 1;
    in_nbhd[static_cast<std::size_t>(v)] = 1;
    std::vector<int> marked{v};
    for (int u : adj[static_cast<std::size_t>(v)]) {
      if (u > v) {
        ext.push_back(u);
        in_nbhd[static_cast<std::size_t>(u)] = 1;
        marked.push_back(u);
      }
    }
    extend(ext, v);
    in_sub[static_cast<std::size_t>(v)] = 0;
    for (int u : marked) in_nbhd[static_cast<std::size_t>(u)] = 0;
  }
  return counts;
}

// Per-graph orbit counts (sum over nodes), length 11.
inline Descriptor orbit_descriptor(const GraphSample& g) {
  return node_orbit_counts(g).colwise().sum().transpose();
}

enum class KernelType { GaussianTV, GaussianEuclidean };

struct MmdKernel {
  KernelType type = KernelType::GaussianTV;
  double sigma = 1.0;
};

namespace detail {

inline double kernel_value(const Descriptor& x, const Descriptor& y, const MmdKernel& k) {
  const Eigen::Index len = std::max(x.size(), y.size());
  Descriptor a = Descriptor::Zero(len), b = Descriptor::Zero(len);
  a.head(x.size()) = x;
  b.head(y.size()) = y;
  double d;
  if (k.type == KernelType::GaussianTV) {
    if (a.sum() > 0.0) a /= a.sum();
    if (b.sum() > 0.0) b /= b.sum();
    d = 0.5 * (a - b).cwiseAbs().sum();
  } else {
    d = (a - b).norm();
  }
  return std::exp(-d * d / (2.0 * k.sigma * k.sigma));
}

// Terms are summed in sorted order so the result does not depend on which
// set comes first.
inline double mean_kernel(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b, const MmdKernel& k) {
  std::vector<double> terms;
  terms.reserve(a.size() * b.size());
  for (const auto& x : a) {
    for (const auto& y : b) terms.push_back(kernel_value(x, y, k));
  }
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace detail

// Biased squared-MMD estimate: E k(a,a') + E k(b,b') - 2 E k(a,b).
inline double mmd(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b, const MmdKernel& k = {}) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mmd: empty descriptor set");
  const double v = detail::mean_kernel(a, a, k) + detail::mean_kernel(b, b, k) - 2.0 * detail::mean_kernel(a, b, k);
  return std::max(v, 0.0);
}

template <typename F>
std::vector<Descriptor> describe(const std::vector<GraphSample>& graphs, F&& f) {
  std::vector<Descriptor> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(f(g));
  return out;
}

struct MetricOptions {
  double sigma = 1.0;           // Gaussian-TV bandwidth
  double orbit_sigma = 30.0;    // Gaussian-Euclidean bandwidth on mean per-node orbit counts
  int clustering_bins = 100;
  int spectral_bins = 200;
  bool orbits = true;
  bool spectral = true;
};

inline double degree_mmd(const std::vector<GraphSample>& a, const std::vector<GraphSample>& b,
                         const MetricOptions& o = {}) {
  return mmd(describe(a, degree_descriptor), describe(b, degree_descriptor), {KernelType::GaussianTV, o.sigma});
}

inline double clustering_mmd(const std::vector<GraphSample>& a, const std::vector<GraphSample>& b,
                             const MetricOptions& o = {}) {
  auto f = [&o](const GraphSample& g) { return clustering_descriptor(g, o.clustering_bins); };
  return mmd(describe(a, f), describe(b, f), {KernelType::GaussianTV, o.sigma});
}

inline double spectral_mmd(const std::vector<GraphSample>& a, const std::vector<GraphSample>& b,
                           const MetricOptions& o = {}) {
  auto f = [&o](const GraphSample& g) { return spectral_descriptor(g, o.spectral_bins); };
  return mmd(describe(a, f), describe(b, f), {KernelType::GaussianTV, o.sigma});
}

inline double orbit_mmd(const std::vector<GraphSample>& a, const std::vector<GraphSample>& b,
                        const MetricOptions& o = {}) {
  auto f = [](const GraphSample& g) { return Descriptor(orbit_descriptor(g) / static_cast<double>(g.num_nodes())); };
  return mmd(describe(a, f), describe(b, f), {KernelType::GaussianEuclidean, o.orbit_sigma});
}

struct ValencyTable {
  std::map<int, int> max_valency;  // node type -> max total bond order
  std::map<int, int> bond_order;   // edge type (!= 0) -> bond order

  static ValencyTable from_json(const nlohmann::json& j) {
    ValencyTable t;
    for (const auto& [k, v] : j.at("max_valency").items()) t.max_valency[std::stoi(k)] = v.get<int>();
    for (const auto& [k, v] : j.at("bond_order").items()) t.bond_order[std::stoi(k)] = v.get<int>();
    return t;
  }
};

inline bool connected(const GraphSample& g) {
  const auto adj = adjacency_lists(g);
  std::vector<char> seen(adj.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int u : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(u)]) {
        seen[static_cast<std::size_t>(u)] = 1;
        ++count;
        stack.push_back(u);
      }
    }
  }
  return count == adj.size();
}

inline bool valid_molecule(const GraphSample& g, const ValencyTable& table) {
  for (int i = 0; i < g.num_nodes(); ++i) {
    const auto cap = table.max_valency.find(g.node(i));
    if (cap == table.max_valency.end()) {
      throw std::invalid_argument("missing valency entry for node type " + std::to_string(g.node(i)));
    }
    int total = 0;
    for (int j = 0; j < g.num_nodes(); ++j) {
      if (i == j || g.edge(i, j) == kNoEdge) continue;
      const auto order = table.bond_order.find(g.edge(i, j));
      if (order == table.bond_order.end()) {
        throw std::invalid_argument("missing bond order entry for edge type " + std::to_string(g.edge(i, j)));
      }
      total += order->second;
    }
    if (total > cap->second) return false;
  }
  return connected(g);
}

struct ValidityUniqueness {
  double validity = 0.0;
  double uniqueness = 0.0;
  std::size_t valid = 0;
  std::size_t distinct = 0;
};

inline ValidityUniqueness validity_uniqueness(const std::vector<GraphSample>& samples, const ValencyTable& table) {
  ValidityUniqueness r;
  std::vector<GraphSample> valid;
  for (const auto& g : samples) {
    if (valid_molecule(g, table)) valid.push_back(g);
  }
  r.valid = valid.size();
  r.validity = samples.empty() ? 0.0 : static_cast<double>(valid.size()) / static_cast<double>(samples.size());
  r.distinct = count_distinct(valid);
  r.uniqueness = valid.empty() ? 0.0 : static_cast<double>(r.distinct) / static_cast<double>(valid.size());
  return r;
}

struct MetricReport {
  double degree_mmd = 0.0;
  double cluster_mmd = 0.0;
  double orbit_mmd = 0.0;
  double spectral_mmd = 0.0;
  bool has_validity = false;
  double validity = 0.0;
  double uniqueness = 0.0;
  std::size_t reference_count = 0;
  std::size_t sample_count = 0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"degree_mmd", degree_mmd},   {"cluster_mmd", cluster_mmd},
                     {"orbit_mmd", orbit_mmd},     {"spectral_mmd", spectral_mmd},
                     {"reference_count", reference_count}, {"sample_count", sample_count}};
    if (has_validity) {
      j["validity"] = validity;
      j["uniqueness"] = uniqueness;
    }
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(6);
    os << "reference graphs  " << reference_count << "\n"
       << "sampled graphs    " << sample_count << "\n"
       << "degree mmd        " << degree_mmd << "\n"
       << "clustering mmd    " << cluster_mmd << "\n"
       << "orbit mmd         " << orbit_mmd << "\n"
       << "spectral mmd      " << spectral_mmd << "\n";
    if (has_validity) os << "validity          " << validity << "\n" << "uniqueness        " << uniqueness << "\n";
    return os.str();
  }
};

inline MetricReport evaluate(const std::vector<GraphSample>& reference, const std::vector<GraphSample>& samples,
                             const MetricOptions& o = {}, const ValencyTable* table = nullptr) {
  MetricReport r;
  r.reference_count = reference.size();
  r.sample_count = samples.size();
  r.degree_mmd = degree_mmd(reference, samples, o);
  r.cluster_mmd = clustering_mmd(reference, samples, o);
  if (o.orbits) r.orbit_mmd = orbit_mmd(reference, samples, o);
  if (o.spectral) r.spectral_mmd = spectral_mmd(reference, samples, o);
  if (table != nullptr) {
    const ValidityUniqueness vu = validity_uniqueness(samples, *table);
    r.has_validity = true;
    r.validity = vu.validity;
    r.uniqueness = vu.uniqueness;
  }
  return r;
}

}  // namespace graphrcg
