#pragma once
// Line-delimited graph files.
//
//   # comment
//   {"format":"graphrcg-graphs","version":1,"node_types":2,"edge_types":2}
//   {"n":3,"nodes":[0,0,1],"edges":[[0,1,1],[1,2,1]]}
//
// The header line is optional; without it the vocabularies are inferred as
// max index + 1 (edge types at least 2). Each record lists only pairs with
// edge type != 0, as [i, j, type] with i < j. Blank lines and lines starting
// with '#' are ignored.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphrcg/graph.hpp"

namespace graphrcg {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct GraphFile {
  int node_types = 0;
  int edge_types = 0;
  std::vector<GraphSample> graphs;
};

namespace detail {

struct RawRecord {
  std::size_t line;
  std::vector<int> nodes;
  std::vector<Edge> edges;
};

inline int json_int(const nlohmann::json& v, std::size_t line, const std::string& what) {
  if (!v.is_number_integer()) throw ParseError(line, what + " must be an integer");
  return v.get<int>();
}

}  // namespace detail

inline GraphFile read_graphs(std::istream& in) {
  using nlohmann::json;
  std::string text;
  std::size_t line_no = 0;
  int header_a = -1, header_b = -1;
  bool seen_record = false;
  std::vector<detail::RawRecord> records;

  while (std::getline(in, text)) {
    ++line_no;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record must be a JSON object");
    if (j.contains("format")) {
      if (seen_record || header_a >= 0) throw ParseError(line_no, "header must be the first line");
      if (j["format"] != "graphrcg-graphs") throw ParseError(line_no, "unknown format tag");
      if (!j.contains("version") || detail::json_int(j["version"], line_no, "version") != 1) {
        throw ParseError(line_no, "unsupported format version");
      }
      header_a = detail::json_int(j.value("node_types", json()), line_no, "node_types");
      header_b = detail::json_int(j.value("edge_types", json()), line_no, "edge_types");
      if (header_a < 1 || header_b < 1) throw ParseError(line_no, "type counts must be >= 1");
      continue;
    }
    seen_record = true;
    for (const auto& [key, _] : j.items()) {
      if (key != "n" && key != "nodes" && key != "edges") throw ParseError(line_no, "unknown key '" + key + "'");
    }
    if (!j.contains("n") || !j.contains("nodes") || !j.contains("edges")) {
      throw ParseError(line_no, "record needs n, nodes and edges");
    }
    const int n = detail::json_int(j["n"], line_no, "n");
    if (n < 1) throw ParseError(line_no, "n must be >= 1");
    if (!j["nodes"].is_array() || static_cast<int>(j["nodes"].size()) != n) {
      throw ParseError(line_no, "nodes must be a list of length n");
    }
    detail::RawRecord rec{line_no, {}, {}};
    for (const auto& v : j["nodes"]) {
      const int t = detail::json_int(v, line_no, "node type");
      if (t < 0 || (header_a >= 0 && t >= header_a)) throw ParseError(line_no, "node type out of range");
      rec.nodes.push_back(t);
    }
    if (!j["edges"].is_array()) throw ParseError(line_no, "edges must be a list");
    std::set<std::pair<int, int>> pairs;
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 3) throw ParseError(line_no, "edge must be [i, j, type]");
      const int a = detail::json_int(e[0], line_no, "edge endpoint");
      const int b = detail::json_int(e[1], line_no, "edge endpoint");
      const int t = detail::json_int(e[2], line_no, "edge type");
      if (a < 0 || b < 0 || a >= n || b >= n) throw ParseError(line_no, "edge endpoint out of range");
      if (a >= b) throw ParseError(line_no, "edge endpoints must satisfy i < j");
      if (t <= 0 || (header_b >= 0 && t >= header_b)) throw ParseError(line_no, "edge type out of range");
      if (!pairs.insert({a, b}).second) {
        throw ParseError(line_no, "duplicate pair (" + std::to_string(a) + "," + std::to_string(b) +
                                      ") in record " + std::to_string(records.size()));
      }
      rec.edges.push_back({a, b, t});
    }
    records.push_back(std::move(rec));
  }

  GraphFile out;
  int a = header_a, b = header_b;
  if (a < 0 || b < 0) {
    int max_node = 0, max_edge = 1;
    for (const auto& r : records) {
      for (int t : r.nodes) max_node = std::max(max_node, t);
      for (const auto& e : r.edges) max_edge = std::max(max_edge, e.type);
    }
    if (a < 0) a = max_node + 1;
    if (b < 0) b = max_edge + 1;
  }
  out.node_types = a;
  out.edge_types = b;
  for (std::size_t k = 0; k < records.size(); ++k) {
    try {
      out.graphs.push_back(GraphSample::from_edges(a, b, records[k].nodes, records[k].edges));
    } catch (const std::invalid_argument& e) {
      throw ParseError(records[k].line, "graph " + std::to_string(k) + " violates invariants: " + e.what());
    }
  }
  return out;
}

inline GraphFile read_graphs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_graphs(in);
}

inline GraphDataset load_dataset(const std::string& path) {
  GraphFile f = read_graphs_file(path);
  if (f.graphs.empty()) throw std::runtime_error(path + ": empty dataset");
  return GraphDataset(std::move(f.graphs));
}

inline void write_graphs(std::ostream& out, const std::vector<GraphSample>& graphs, int node_types,
                         int edge_types) {
  out << R"({"format":"graphrcg-graphs","version":1,"node_types":)" << node_types
      << R"(,"edge_types":)" << edge_types << "}\n";
  for (const auto& g : graphs) {
    if (g.node_types() != node_types || g.edge_types() != edge_types) {
      throw std::invalid_argument("graph vocabulary differs from file header");
    }
    out << R"({"n":)" << g.num_nodes() << R"(,"nodes":[)";
    for (int i = 0; i < g.num_nodes(); ++i) out << (i ? "," : "") << g.node(i);
    out << R"(],"edges":[)";
    bool first = true;
    for (const auto& e : g.edge_list()) {
      out << (first ? "" : ",") << '[' << e.i << ',' << e.j << ',' << e.type << ']';
      first = false;
    }
    out << "]}\n";
  }
}

// Atomic write: temp file then rename.
inline void write_graphs_file(const std::string& path, const std::vector<GraphSample>& graphs, int node_types,
                              int edge_types) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    write_graphs(out, graphs, node_types, edge_types);
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename " + tmp);
}

inline void save_dataset(const std::string& path, const GraphDataset& ds) {
  write_graphs_file(path, ds.samples(), ds.node_types(), ds.edge_types());
}

}  // namespace graphrcg
