#include "bayesg/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace bayesg::graph {

EnvGraph::EnvGraph(int node_count, std::vector<Edge> edges, std::vector<std::string> labels)
    : node_count_(node_count), labels_(std::move(labels)) {
  if (node_count <= 0) throw GraphError("graph must have at least one node");
  if (!labels_.empty() && static_cast<int>(labels_.size()) != node_count)
    throw GraphError("label count does not match node count");
  std::set<Edge> unique;
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= node_count || v >= node_count)
      throw GraphError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") references a node outside [0," + std::to_string(node_count) + ")");
    if (u == v) throw GraphError("self-loop on node " + std::to_string(u));
    unique.insert({std::min(u, v), std::max(u, v)});
  }
  edges_.assign(unique.begin(), unique.end());
  adjacency_.resize(node_count);
  for (auto [u, v] : edges_) {
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());

  const int components = component_count();
  if (components > 1)
    diagnostics_.push_back("graph is disconnected: " + std::to_string(components) +
                           " connected components");
}

const std::vector<NodeId>& EnvGraph::neighbors(NodeId i) const {
  if (i < 0 || i >= node_count_) throw GraphError("invalid node id " + std::to_string(i));
  return adjacency_[i];
}

int EnvGraph::max_degree() const {
  int d = 0;
  for (const auto& n : adjacency_) d = std::max(d, static_cast<int>(n.size()));
  return d;
}

bool EnvGraph::adjacent(NodeId u, NodeId v) const {
  const auto& n = neighbors(u);
  return std::binary_search(n.begin(), n.end(), v);
}

Eigen::MatrixXd EnvGraph::adjacency_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(node_count_, node_count_);
  for (auto [u, v] : edges_) a(u, v) = a(v, u) = 1.0;
  return a;
}

int EnvGraph::component_count() const {
  std::vector<int> parent(node_count_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = node_count_;
  for (auto [u, v] : edges_) {
    int a = find(u), b = find(v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components;
}

int EgoGraph::index_of(NodeId node) const {
  auto it = std::find(members.begin(), members.end(), node);
  return it == members.end() ? -1 : static_cast<int>(it - members.begin());
}

int HopDistanceTable::at(NodeId node) const {
  for (std::size_t k = 0; k < members.size(); ++k)
    if (members[k] == node) return distance[k];
  throw GraphError("node " + std::to_string(node) + " is not an ego member");
}

namespace {

bool parse_int(std::string_view tok, int& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace

// Lines: "u v" declares an edge, a lone "u" declares a (possibly isolated)
// node, '#' starts a comment line. Ids must cover 0..max contiguously.
EnvGraph load_graph(std::string_view text) {
  std::vector<Edge> edges;
  std::set<int> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() > 2) throw ParseError(line_no, "expected \"u v\", got \"" + line + "\"");
    int ids[2] = {0, 0};
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (!parse_int(toks[k], ids[k]) || ids[k] < 0)
        throw ParseError(line_no, "invalid node id \"" + toks[k] + "\"");
      seen.insert(ids[k]);
    }
    if (toks.size() == 2) {
      if (ids[0] == ids[1])
        throw ParseError(line_no, "self-loop on node " + std::to_string(ids[0]));
      edges.emplace_back(ids[0], ids[1]);
    }
  }
  if (seen.empty()) throw ParseError(line_no, "graph declares no nodes");
  const int n = *seen.rbegin() + 1;
  if (static_cast<int>(seen.size()) != n) {
    for (int k = 0; k < n; ++k)
      if (!seen.count(k))
        throw GraphError("node ids are not contiguous: node " + std::to_string(k) + " missing");
  }
  return EnvGraph(n, std::move(edges));
}

EnvGraph load_graph_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw GraphError("cannot open edge-list file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_graph(ss.str());
}

EnvGraph make_grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw GraphError("grid dimensions must be positive");
  std::vector<Edge> edges;
  std::vector<std::string> labels;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      labels.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
      if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
    }
  return EnvGraph(rows * cols, std::move(edges), std::move(labels));
}

EnvGraph graph_from_spec(std::string_view spec) {
  if (spec.starts_with("grid:")) {
    auto dims = spec.substr(5);
    auto x = dims.find('x');
    int r = 0, c = 0;
    if (x == std::string_view::npos || !parse_int(dims.substr(0, x), r) ||
        !parse_int(dims.substr(x + 1), c))
      throw GraphError("bad grid spec \"" + std::string(spec) + "\", expected grid:RxC");
    return make_grid(r, c);
  }
  if (spec.starts_with("file:")) return load_graph_file(std::string(spec.substr(5)));
  throw GraphError("unknown environment spec \"" + std::string(spec) + "\"");
}

EgoGraph ego_graph(const EnvGraph& g, NodeId i, bool include_neighbor_edges) {
  EgoGraph e;
  e.center = i;
  e.members.push_back(i);
  for (NodeId j : g.neighbors(i)) e.members.push_back(j);
  const int n = e.size();
  e.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (int b = 1; b < n; ++b) {
    e.adjacency(0, b) = e.adjacency(b, 0) = 1.0;
    e.edges.emplace_back(0, b);
  }
  if (include_neighbor_edges) {
    for (int a = 1; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (g.adjacent(e.members[a], e.members[b])) {
          e.adjacency(a, b) = e.adjacency(b, a) = 1.0;
          e.edges.emplace_back(a, b);
        }
  }
  return e;
}

HopDistanceTable hop_distances(const EgoGraph& e) {
  HopDistanceTable t;
  t.members = e.members;
  t.distance.assign(e.members.size(), 1);
  if (!t.distance.empty()) t.distance[0] = 0;
  return t;
}

std::string to_edge_list(const EnvGraph& g) {
  std::ostringstream out;
  out << "# nodes " << g.node_count() << "\n";
  std::vector<bool> touched(g.node_count(), false);
  for (auto [u, v] : g.edges()) touched[u] = touched[v] = true;
  for (int k = 0; k < g.node_count(); ++k)
    if (!touched[k]) out << k << "\n";
  for (auto [u, v] : g.edges()) out << u << " " << v << "\n";
  return out.str();
}

}  // namespace bayesg::graph
