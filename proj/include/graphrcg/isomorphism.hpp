#pragma once
// Typed-graph isomorphism: colour refinement for a certificate, then an exact
// backtracking check that only pairs nodes of equal refined colour.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graphrcg/graph.hpp"

namespace graphrcg {

namespace detail {

// Stable colour classes after refinement; colours are comparable across
// graphs because they are hashes of canonical signature strings.
inline std::vector<std::string> refine_signatures(const GraphSample& g) {
  const int n = g.num_nodes();
  std::vector<std::string> sig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sig[static_cast<std::size_t>(i)] = std::to_string(g.node(i));
  for (int round = 0; round < n; ++round) {
    std::vector<std::string> next(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> neigh;
      for (int j = 0; j < n; ++j) {
        if (j != i && g.edge(i, j) != kNoEdge) neigh.push_back(std::to_string(g.edge(i, j)) + ":" + sig[static_cast<std::size_t>(j)]);
      }
      std::sort(neigh.begin(), neigh.end());
      std::string s = sig[static_cast<std::size_t>(i)] + "(";
      for (const auto& x : neigh) s += x + ",";
      next[static_cast<std::size_t>(i)] = s + ")";
    }
    // Compress to short canonical names so strings stay small.
    std::vector<std::string> sorted = next;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::map<std::string, std::string> name;
    for (const auto& s : sorted) name[s] = "c" + std::to_string(std::hash<std::string>{}(s));
    std::vector<std::string> renamed(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) renamed[static_cast<std::size_t>(i)] = name[next[static_cast<std::size_t>(i)]];
    // Refinement is stable when the partition stops splitting.
    std::map<std::string, int> before, after;
    for (const auto& s : sig) before[s]++;
    for (const auto& s : renamed) after[s]++;
    const bool stable = before.size() == after.size();
    sig = std::move(renamed);
    if (stable) break;
  }
  return sig;
}

inline bool extend_mapping(const GraphSample& a, const GraphSample& b, const std::vector<std::string>& ca,
                           const std::vector<std::string>& cb, std::vector<int>& map, std::vector<bool>& used,
                           const std::vector<int>& order, std::size_t depth) {
  if (depth == order.size()) return true;
  const int u = order[depth];
  for (int v = 0; v < b.num_nodes(); ++v) {
    if (used[static_cast<std::size_t>(v)] || ca[static_cast<std::size_t>(u)] != cb[static_cast<std::size_t>(v)]) continue;
    bool ok = a.node(u) == b.node(v);
    for (std::size_t k = 0; ok && k < depth; ++k) {
      const int w = order[k];
      ok = a.edge(u, w) == b.edge(v, map[static_cast<std::size_t>(w)]);
    }
    if (!ok) continue;
    map[static_cast<std::size_t>(u)] = v;
    used[static_cast<std::size_t>(v)] = true;
    if (extend_mapping(a, b, ca, cb, map, used, order, depth + 1)) return true;
    used[static_cast<std::size_t>(v)] = false;
  }
  return false;
}

}  // namespace detail

// Permutation-invariant summary; equal for isomorphic graphs.
inline std::string graph_certificate(const GraphSample& g) {
  std::vector<std::string> sig = detail::refine_signatures(g);
  std::sort(sig.begin(), sig.end());
  std::string out = std::to_string(g.num_nodes()) + "/" + std::to_string(g.num_edges()) + "/";
  for (const auto& s : sig) out += s + ";";
  return out;
}

// Exact test respecting node and edge types.
inline bool isomorphic(const GraphSample& a, const GraphSample& b) {
  if (a.num_nodes() != b.num_nodes() || a.num_edges() != b.num_edges()) return false;
  const auto ca = detail::refine_signatures(a);
  const auto cb = detail::refine_signatures(b);
  {
    auto sa = ca, sb = cb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  // Map rarest colour classes first to prune early.
  std::map<std::string, int> freq;
  for (const auto& c : ca) freq[c]++;
  std::vector<int> order(static_cast<std::size_t>(a.num_nodes()));
  for (int i = 0; i < a.num_nodes(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return freq[ca[static_cast<std::size_t>(x)]] < freq[ca[static_cast<std::size_t>(y)]];
  });
  std::vector<int> map(static_cast<std::size_t>(a.num_nodes()), -1);
  std::vector<bool> used(static_cast<std::size_t>(a.num_nodes()), false);
  return detail::extend_mapping(a, b, ca, cb, map, used, order, 0);
}

// Number of isomorphism classes among `graphs`.
inline std::size_t count_distinct(const std::vector<GraphSample>& graphs) {
  std::map<std::string, std::vector<const GraphSample*>> buckets;
  std::size_t distinct = 0;
  for (const auto& g : graphs) {
    auto& bucket = buckets[graph_certificate(g)];
    bool seen = false;
    for (const GraphSample* other : bucket) {
      if (isomorphic(g, *other)) {
        seen = true;
        break;
      }
    }
    if (!seen) {
      bucket.push_back(&g);
      ++distinct;
    }
  }
  return distinct;
}

}  // namespace graphrcg
