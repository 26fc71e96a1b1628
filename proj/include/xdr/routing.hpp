#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "xdr/topology.hpp"

namespace xdr {

// Per-link weight, indexed by EdgeIndex. Must be positive on usable links.
using LinkWeights = std::vector<double>;

LinkWeights hop_weights(const NetworkGraph& graph);

// One path per ordered (src, dst) pair of a scope; path(i, i) == [i].
class PathMatrix {
 public:
  PathMatrix() = default;
  PathMatrix(const NetworkGraph& graph, Scope scope);

  Scope scope() const noexcept { return scope_; }
  const std::vector<NodeIndex>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool contains(NodeIndex n) const { return n < local_of_.size() && local_of_[n] >= 0; }

  // Lookup by global node index.
  const Path& path(NodeIndex src, NodeIndex dst) const;
  void set_path(NodeIndex src, NodeIndex dst, Path p);
  // Lookup by local row/column.
  const Path& at(std::size_t i, std::size_t j) const { return paths_.at(i * nodes_.size() + j); }

  bool operator==(const PathMatrix&) const = default;

 private:
  Scope scope_;
  std::vector<NodeIndex> nodes_;
  std::vector<int> local_of_;
  std::vector<Path> paths_;
};

// The action space of one agent: k coherent path matrices.
using CandidatePathSet = std::vector<PathMatrix>;

double path_cost(const NetworkGraph& graph, std::span<const NodeIndex> path, const LinkWeights& weights);

// Minimum-weight path between two nodes using only the scope's links; ties
// go to the lexicographically smallest node sequence. Throws Unreachable.
Path shortest_path(const NetworkGraph& graph, NodeIndex src, NodeIndex dst, const LinkWeights& weights,
                   Scope scope = Scope::global());

// All-pairs shortest paths over a scope.
PathMatrix dijkstra_paths(const NetworkGraph& graph, const LinkWeights& weights, Scope scope = Scope::global());

// Shortest paths by measured link delay. `delays_ms` is indexed by edge;
// NaN, non-positive or missing entries on scope links throw MissingDelay.
PathMatrix ospf_paths(const NetworkGraph& graph, std::span<const double> delays_ms, Scope scope = Scope::global());

// Up to k loop-free src -> dst paths in ascending (cost, lexicographic)
// order. Throws Unreachable when no path exists, InvalidRange when k < 1.
std::vector<Path> yen_k_shortest(const NetworkGraph& graph, NodeIndex src, NodeIndex dst, std::size_t k,
                                 const LinkWeights& weights, Scope scope = Scope::global());

// ceil(0.1 * m * m) with m the largest domain size.
std::size_t candidate_count(const NetworkGraph& graph);

// Matrix j gives every pair its j-th shortest hop path, repeating the last
// one when the pair has fewer than j + 1 simple paths.
CandidatePathSet build_candidates(const NetworkGraph& graph, Scope scope, std::size_t k);

}  // namespace xdr
