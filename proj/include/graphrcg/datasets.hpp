#pragma once
// Synthetic corpora: stochastic block model graphs and Delaunay planar graphs.
// Each graph draws from its own engine seeded by (master seed, graph index).

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphrcg/graph.hpp"
#include "graphrcg/random.hpp"

namespace graphrcg {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct SbmConfig {
  int num_graphs = 200;
  int min_communities = 2;
  int max_communities = 5;
  int min_community_size = 20;
  int max_community_size = 40;
  double intra_prob = 0.3;
  double inter_prob = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_graphs < 1) throw ConfigError("sbm.num_graphs", "must be >= 1");
    if (min_communities < 1 || max_communities < min_communities) {
      throw ConfigError("sbm.min_communities", "need 1 <= min_communities <= max_communities");
    }
    if (min_community_size < 1 || max_community_size < min_community_size) {
      throw ConfigError("sbm.min_community_size", "need 1 <= min_community_size <= max_community_size");
    }
    if (!(intra_prob >= 0.0 && intra_prob <= 1.0)) throw ConfigError("sbm.intra_prob", "must lie in [0, 1]");
    if (!(inter_prob >= 0.0)) throw ConfigError("sbm.inter_prob", "must be >= 0");
    if (!(inter_prob < intra_prob)) throw ConfigError("sbm.inter_prob", "must be < sbm.intra_prob");
    if (max_communities * max_community_size > 200) {
      throw ConfigError("sbm.max_community_size", "max total graph size exceeds 200");
    }
  }
};

struct PlanarConfig {
  int num_graphs = 200;
  int num_nodes = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_graphs < 1) throw ConfigError("planar.num_graphs", "must be >= 1");
    if (num_nodes < 3) throw ConfigError("planar.num_nodes", "must be >= 3");
  }
};

// Community label of every node, for tests and diagnostics.
struct SbmGraph {
  GraphSample graph;
  std::vector<int> community;
};

inline SbmGraph generate_sbm_graph(const SbmConfig& cfg, std::uint64_t graph_seed) {
  Engine rng(graph_seed);
  const int k = uniform_int(rng, cfg.min_communities, cfg.max_communities);
  std::vector<int> community;
  for (int c = 0; c < k; ++c) {
    const int size = uniform_int(rng, cfg.min_community_size, cfg.max_community_size);
    community.insert(community.end(), static_cast<std::size_t>(size), c);
  }
  const int n = static_cast<int>(community.size());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = community[static_cast<std::size_t>(i)] == community[static_cast<std::size_t>(j)]
                           ? cfg.intra_prob
                           : cfg.inter_prob;
      if (uniform01(rng) < p) edges.push_back({i, j, 1});
    }
  }
  return {GraphSample::from_edges(1, 2, std::vector<int>(static_cast<std::size_t>(n), 0), edges),
          std::move(community)};
}

inline GraphDataset generate_sbm(const SbmConfig& cfg) {
  cfg.validate();
  std::vector<GraphSample> out;
  out.reserve(static_cast<std::size_t>(cfg.num_graphs));
  for (int g = 0; g < cfg.num_graphs; ++g) {
    out.push_back(generate_sbm_graph(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(g))).graph);
  }
  return GraphDataset(std::move(out));
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Bowyer-Watson Delaunay triangulation; returns the unique undirected edges.
inline std::vector<std::pair<int, int>> delaunay_edges(const std::vector<Point2>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 3) throw std::invalid_argument("delaunay needs at least 3 points");
  double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
  for (const auto& p : pts) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const double span = std::max({maxx - minx, maxy - miny, 1e-12});
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  std::vector<Point2> v = pts;
  const double big = 1e4 * span;
  v.push_back({cx - big, cy - big});
  v.push_back({cx + big, cy - big});
  v.push_back({cx, cy + big});

  struct Tri {
    std::array<int, 3> v;
    double ccx, ccy, r2;
  };
  auto make_tri = [&v](int a, int b, int c) {
    const Point2 &A = v[static_cast<std::size_t>(a)], &B = v[static_cast<std::size_t>(b)],
                 &C = v[static_cast<std::size_t>(c)];
    const double d = 2.0 * (A.x * (B.y - C.y) + B.x * (C.y - A.y) + C.x * (A.y - B.y));
    const double a2 = A.x * A.x + A.y * A.y, b2 = B.x * B.x + B.y * B.y, c2 = C.x * C.x + C.y * C.y;
    const double ux = (a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2 * (A.y - B.y)) / d;
    const double uy = (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2 * (B.x - A.x)) / d;
    return Tri{{a, b, c}, ux, uy, (A.x - ux) * (A.x - ux) + (A.y - uy) * (A.y - uy)};
  };

  std::vector<Tri> tris{make_tri(n, n + 1, n + 2)};
  for (int p = 0; p < n; ++p) {
    const Point2& P = v[static_cast<std::size_t>(p)];
    std::vector<Tri> keep;
    std::map<std::pair<int, int>, int> boundary;
    for (const auto& t : tris) {
      const double dx = P.x - t.ccx, dy = P.y - t.ccy;
      if (dx * dx + dy * dy < t.r2) {
        for (int e = 0; e < 3; ++e) {
          int a = t.v[static_cast<std::size_t>(e)], b = t.v[static_cast<std::size_t>((e + 1) % 3)];
          if (a > b) std::swap(a, b);
          ++boundary[{a, b}];
        }
      } else {
        keep.push_back(t);
      }
    }
    for (const auto& [edge, count] : boundary) {
      if (count == 1) keep.push_back(make_tri(edge.first, edge.second, p));
    }
    tris = std::move(keep);
  }

  std::set<std::pair<int, int>> edges;
  for (const auto& t : tris) {
    for (int e = 0; e < 3; ++e) {
      int a = t.v[static_cast<std::size_t>(e)], b = t.v[static_cast<std::size_t>((e + 1) % 3)];
      if (a >= n || b >= n) continue;
      if (a > b) std::swap(a, b);
      edges.insert({a, b});
    }
  }
  return {edges.begin(), edges.end()};
}

inline GraphSample generate_planar_graph(int num_nodes, std::uint64_t graph_seed) {
  Engine rng(graph_seed);
  std::vector<Point2> pts(static_cast<std::size_t>(num_nodes));
  for (auto& p : pts) {
    p.x = uniform01(rng);
    p.y = uniform01(rng);
  }
  std::vector<Edge> edges;
  for (const auto& [a, b] : delaunay_edges(pts)) edges.push_back({a, b, 1});
  return GraphSample::from_edges(1, 2, std::vector<int>(static_cast<std::size_t>(num_nodes), 0), edges);
}

inline GraphDataset generate_planar(const PlanarConfig& cfg) {
  cfg.validate();
  std::vector<GraphSample> out;
  out.reserve(static_cast<std::size_t>(cfg.num_graphs));
  for (int g = 0; g < cfg.num_graphs; ++g) {
    out.push_back(generate_planar_graph(cfg.num_nodes, derive_seed(cfg.seed, static_cast<std::uint64_t>(g))));
  }
  return GraphDataset(std::move(out));
}

}  // namespace graphrcg
