#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphfpe/error.hpp"
#include "graphfpe/spectrum.hpp"

namespace graphfpe {

/// Undirected weighted edge; stored with i < j (0-based node ids).
struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  int node;
  std::size_t edge;  // index into Graph::edges()
};

/// Weighted, undirected, connected graph without self loops or multi-edges.
///
/// Immutable after construction; copies share the underlying storage.
class Graph {
 public:
  /// 0-based node ids. Edge orientation in the input is irrelevant; each edge is
  /// stored as (min, max) in input order.
  Graph(int n, const std::vector<Edge>& edges) {
    detail::require(n >= 2, ErrorCode::InvalidArgument, "graph needs at least two nodes");
    auto storage = std::make_shared<Data>();
    Data& d = *storage;
    d.n = n;
    d.adjacency.resize(static_cast<std::size_t>(n));
    for (const Edge& input : edges) {
      if (input.i < 0 || input.j < 0 || input.i >= n || input.j >= n)
        detail::fail(ErrorCode::InvalidArgument, "edge endpoint out of range");
      if (input.i == input.j)
        detail::fail(ErrorCode::SelfLoop, "self loop at node " + std::to_string(input.i + 1));
      if (!(input.weight > 0.0) || !std::isfinite(input.weight))
        detail::fail(ErrorCode::NonpositiveWeight, "edge weight must be positive and finite");
      Edge e{std::min(input.i, input.j), std::max(input.i, input.j), input.weight};
      auto key = std::make_pair(e.i, e.j);
      if (d.index.count(key))
        detail::fail(ErrorCode::DuplicateEdge,
                     "duplicate edge (" + std::to_string(e.i + 1) + ", " + std::to_string(e.j + 1) + ")");
      const std::size_t idx = d.edges.size();
      d.index.emplace(key, idx);
      d.edges.push_back(e);
      d.adjacency[static_cast<std::size_t>(e.i)].push_back({e.j, idx});
      d.adjacency[static_cast<std::size_t>(e.j)].push_back({e.i, idx});
      d.max_weight = std::max(d.max_weight, e.weight);
    }
    for (const auto& nbrs : d.adjacency) d.max_degree = std::max(d.max_degree, static_cast<int>(nbrs.size()));

    // Connectivity by depth-first search from node 0.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : d.adjacency[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(nb.node)]) {
          seen[static_cast<std::size_t>(nb.node)] = 1;
          ++reached;
          stack.push_back(nb.node);
        }
      }
    }
    if (reached != n) detail::fail(ErrorCode::DisconnectedGraph, "graph is not connected");
    data_ = std::move(storage);
  }

  int node_count() const { return data_->n; }
  std::size_t edge_count() const { return data_->edges.size(); }
  const std::vector<Edge>& edges() const { return data_->edges; }
  const std::vector<Neighbor>& neighbors(int node) const { return data_->adjacency.at(static_cast<std::size_t>(node)); }

  /// Maximal node degree Deg(G).
  int max_degree() const { return data_->max_degree; }
  double max_weight() const { return data_->max_weight; }

  std::optional<std::size_t> edge_index(int i, int j) const {
    auto it = data_->index.find({std::min(i, j), std::max(i, j)});
    if (it == data_->index.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.data_ == b.data_ || (a.data_->n == b.data_->n && a.data_->edges == b.data_->edges);
  }

 private:
  struct Data {
    int n = 0;
    std::vector<Edge> edges;
    std::vector<std::vector<Neighbor>> adjacency;
    std::map<std::pair<int, int>, std::size_t> index;
    int max_degree = 0;
    double max_weight = 0.0;
  };
  std::shared_ptr<const Data> data_;
};

inline Graph build_graph(int n, const std::vector<Edge>& edges) { return Graph(n, edges); }

/// Discrete gradient matrix D (|E| x n): row e = (i, j) has +sqrt(w) at column i
/// and -sqrt(w) at column j, so (D phi)_e = sqrt(w_ij) (phi_i - phi_j).
inline Matrix incidence_matrix(const Graph& g) {
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(g.edge_count()), g.node_count());
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edges()[e];
    const double s = std::sqrt(edge.weight);
    d(static_cast<Eigen::Index>(e), edge.i) = s;
    d(static_cast<Eigen::Index>(e), edge.j) = -s;
  }
  return d;
}

/// Combinatorial Laplacian L^ = D^T D, assembled edge by edge.
inline Matrix graph_laplacian(const Graph& g) {
  const int n = g.node_count();
  Matrix l = Matrix::Zero(n, n);
  for (const Edge& e : g.edges()) {
    l(e.i, e.i) += e.weight;
    l(e.j, e.j) += e.weight;
    l(e.i, e.j) -= e.weight;
    l(e.j, e.i) -= e.weight;
  }
  return l;
}

}  // namespace graphfpe
