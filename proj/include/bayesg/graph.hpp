#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bayesg::graph {

using NodeId = int;
using Edge = std::pair<NodeId, NodeId>;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public GraphError {
 public:
  ParseError(int line, const std::string& what)
      : GraphError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Undirected physical interaction graph. Edges are stored once with u < v.
class EnvGraph {
 public:
  EnvGraph() = default;
  EnvGraph(int node_count, std::vector<Edge> edges,
           std::vector<std::string> labels = {});

  int node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  // Neighbors in ascending id order.
  const std::vector<NodeId>& neighbors(NodeId i) const;
  int degree(NodeId i) const { return static_cast<int>(neighbors(i).size()); }
  int max_degree() const;
  bool adjacent(NodeId u, NodeId v) const;

  const std::vector<std::string>& labels() const { return labels_; }
  Eigen::MatrixXd adjacency_matrix() const;

  int component_count() const;
  // Diagnostics collected at construction (e.g. disconnected graph).
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  bool operator==(const EnvGraph& other) const {
    return node_count_ == other.node_count_ && edges_ == other.edges_;
  }

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<std::string> labels_;
  std::vector<std::string> diagnostics_;
};

// Closed 1-hop neighborhood of `center`. members[0] is the center, the
// remaining members follow in ascending node id.
struct EgoGraph {
  NodeId center = 0;
  std::vector<NodeId> members;
  Eigen::MatrixXd adjacency;
  // Candidate edges as member-index pairs (a < b). Center-incident edges come
  // first (ordered by member index), then neighbor-neighbor edges.
  std::vector<Edge> edges;

  int size() const { return static_cast<int>(members.size()); }
  int neighbor_count() const { return size() - 1; }
  int edge_count() const { return static_cast<int>(edges.size()); }
  // Member index of node, or -1.
  int index_of(NodeId node) const;
};

// Hop distance d_ij per ego member, aligned with EgoGraph::members.
struct HopDistanceTable {
  std::vector<NodeId> members;
  std::vector<int> distance;

  int at(NodeId node) const;
};

EnvGraph load_graph(std::string_view text);
EnvGraph load_graph_file(const std::string& path);
EnvGraph make_grid(int rows, int cols);

// Parses "grid:RxC" or "file:<path>".
EnvGraph graph_from_spec(std::string_view spec);

// When include_neighbor_edges is false, only center-incident edges are kept.
EgoGraph ego_graph(const EnvGraph& g, NodeId i, bool include_neighbor_edges = true);
HopDistanceTable hop_distances(const EgoGraph& e);

std::string to_edge_list(const EnvGraph& g);

}  // namespace bayesg::graph
