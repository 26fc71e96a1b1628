#include "xdr/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <set>

#include "xdr/error.hpp"

namespace xdr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_cost(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

// Graph restricted to a scope, with optional extra bans for spur searches.
struct SearchSpace {
  const NetworkGraph& graph;
  const LinkWeights& weights;
  std::vector<char> edge_ok;
  std::vector<char> node_ok;

  SearchSpace(const NetworkGraph& g, const LinkWeights& w, Scope scope) : graph(g), weights(w) {
    if (w.size() != g.edge_count()) raise(Errc::InvalidRange, "weight vector does not match edge count");
    const ScopeView view = make_scope_view(g, scope);
    edge_ok.assign(g.edge_count(), 0);
    for (EdgeIndex e : view.links) edge_ok[e] = 1;
    node_ok.assign(g.node_count(), 0);
    for (NodeIndex n : view.nodes) node_ok[n] = 1;
  }

  // Distance of every node to dst.
  std::vector<double> distances_to(NodeIndex dst) const {
    std::vector<double> dist(graph.node_count(), kInf);
    if (!node_ok[dst]) return dist;
    using Item = std::pair<double, NodeIndex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[dst] = 0.0;
    heap.push({0.0, dst});
    while (!heap.empty()) {
      const auto [d, n] = heap.top();
      heap.pop();
      if (d > dist[n]) continue;
      for (const auto& nb : graph.neighbors(n)) {
        if (!edge_ok[nb.edge] || !node_ok[nb.node]) continue;
        const double nd = d + weights[nb.edge];
        if (nd < dist[nb.node]) {
          dist[nb.node] = nd;
          heap.push({nd, nb.node});
        }
      }
    }
    return dist;
  }

  // Lexicographically smallest among the minimum-cost paths, built greedily
  // from src by always stepping to the smallest neighbor still on a shortest
  // path.
  std::optional<Path> extract(NodeIndex src, NodeIndex dst, const std::vector<double>& dist) const {
    if (!node_ok[src] || !std::isfinite(dist[src])) return std::nullopt;
    Path path{src};
    NodeIndex at = src;
    while (at != dst) {
      bool moved = false;
      for (const auto& nb : graph.neighbors(at)) {
        if (!edge_ok[nb.edge] || !node_ok[nb.node] || !std::isfinite(dist[nb.node])) continue;
        if (same_cost(dist[at], weights[nb.edge] + dist[nb.node]) && dist[nb.node] < dist[at]) {
          at = nb.node;
          path.push_back(at);
          moved = true;
          break;
        }
      }
      if (!moved || path.size() > graph.node_count()) return std::nullopt;
    }
    return path;
  }

  std::optional<Path> shortest(NodeIndex src, NodeIndex dst) const { return extract(src, dst, distances_to(dst)); }
};

void check_weights(const NetworkGraph& graph, const LinkWeights& weights, Scope scope) {
  if (weights.size() != graph.edge_count()) raise(Errc::InvalidRange, "weight vector does not match edge count");
  for (EdgeIndex e : make_scope_view(graph, scope).links) {
    if (!(weights[e] > 0.0) || !std::isfinite(weights[e])) raise(Errc::InvalidRange, "link weights must be positive");
  }
}

struct RankedPath {
  double cost;
  Path path;
};

bool ranked_less(const RankedPath& a, const RankedPath& b) {
  if (!same_cost(a.cost, b.cost)) return a.cost < b.cost;
  return a.path < b.path;
}

}  // namespace

LinkWeights hop_weights(const NetworkGraph& graph) { return LinkWeights(graph.edge_count(), NetworkGraph::kLinkWeight); }

PathMatrix::PathMatrix(const NetworkGraph& graph, Scope scope) : scope_(scope) {
  const ScopeView view = make_scope_view(graph, scope);
  nodes_ = view.nodes;
  local_of_ = view.local_of;
  paths_.resize(nodes_.size() * nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) paths_[i * nodes_.size() + i] = Path{nodes_[i]};
}

const Path& PathMatrix::path(NodeIndex src, NodeIndex dst) const {
  if (!contains(src) || !contains(dst)) raise(Errc::NoPath, "pair outside the path matrix scope");
  return paths_[static_cast<std::size_t>(local_of_[src]) * nodes_.size() + static_cast<std::size_t>(local_of_[dst])];
}

void PathMatrix::set_path(NodeIndex src, NodeIndex dst, Path p) {
  if (!contains(src) || !contains(dst)) raise(Errc::NoPath, "pair outside the path matrix scope");
  paths_[static_cast<std::size_t>(local_of_[src]) * nodes_.size() + static_cast<std::size_t>(local_of_[dst])] =
      std::move(p);
}

double path_cost(const NetworkGraph& graph, std::span<const NodeIndex> path, const LinkWeights& weights) {
  double cost = 0.0;
  for (EdgeIndex e : path_edges(graph, path)) cost += weights.at(e);
  return cost;
}

Path shortest_path(const NetworkGraph& graph, NodeIndex src, NodeIndex dst, const LinkWeights& weights, Scope scope) {
  check_weights(graph, weights, scope);
  const SearchSpace space(graph, weights, scope);
  auto p = space.shortest(src, dst);
  if (!p) raise(Errc::Unreachable, graph.node_id(dst) + " unreachable from " + graph.node_id(src));
  return *p;
}

PathMatrix dijkstra_paths(const NetworkGraph& graph, const LinkWeights& weights, Scope scope) {
  check_weights(graph, weights, scope);
  const SearchSpace space(graph, weights, scope);
  PathMatrix out(graph, scope);
  for (NodeIndex dst : out.nodes()) {
    const auto dist = space.distances_to(dst);
    for (NodeIndex src : out.nodes()) {
      if (src == dst) continue;
      auto p = space.extract(src, dst, dist);
      if (!p) raise(Errc::Unreachable, graph.node_id(dst) + " unreachable from " + graph.node_id(src));
      out.set_path(src, dst, std::move(*p));
    }
  }
  return out;
}

PathMatrix ospf_paths(const NetworkGraph& graph, std::span<const double> delays_ms, Scope scope) {
  if (delays_ms.size() != graph.edge_count()) raise(Errc::MissingDelay, "delay vector does not cover every link");
  LinkWeights weights(graph.edge_count(), NetworkGraph::kLinkWeight);
  for (EdgeIndex e : make_scope_view(graph, scope).links) {
    const double d = delays_ms[e];
    if (!std::isfinite(d) || !(d > 0.0)) {
      const auto& edge = graph.edge(e);
      raise(Errc::MissingDelay, "no usable delay for link " + graph.node_id(edge.u) + "-" + graph.node_id(edge.v));
    }
    weights[e] = d;
  }
  return dijkstra_paths(graph, weights, scope);
}

std::vector<Path> yen_k_shortest(const NetworkGraph& graph, NodeIndex src, NodeIndex dst, std::size_t k,
                                 const LinkWeights& weights, Scope scope) {
  if (k < 1) raise(Errc::InvalidRange, "k must be at least 1");
  check_weights(graph, weights, scope);
  const SearchSpace base(graph, weights, scope);

  std::vector<Path> accepted;
  {
    auto first = base.shortest(src, dst);
    if (!first) raise(Errc::Unreachable, graph.node_id(dst) + " unreachable from " + graph.node_id(src));
    accepted.push_back(std::move(*first));
  }
  std::vector<RankedPath> pending;
  std::set<Path> known(accepted.begin(), accepted.end());

  while (accepted.size() < k) {
    const Path prev = accepted.back();
    for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
      const NodeIndex spur = prev[i];
      SearchSpace space = base;
      for (const auto& p : accepted) {
        if (p.size() > i + 1 && std::equal(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i) + 1, p.begin())) {
          if (const auto e = graph.edge_between(p[i], p[i + 1])) space.edge_ok[*e] = 0;
        }
      }
      for (std::size_t r = 0; r < i; ++r) space.node_ok[prev[r]] = 0;
      auto spur_path = space.shortest(spur, dst);
      if (!spur_path) continue;
      Path candidate(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i));
      candidate.insert(candidate.end(), spur_path->begin(), spur_path->end());
      if (known.insert(candidate).second) {
        pending.push_back({path_cost(graph, candidate, weights), std::move(candidate)});
      }
    }
    if (pending.empty()) break;
    const auto best = std::min_element(pending.begin(), pending.end(), ranked_less);
    accepted.push_back(std::move(best->path));
    pending.erase(best);
  }
  return accepted;
}

std::size_t candidate_count(const NetworkGraph& graph) {
  const std::size_t m = graph.largest_domain_size();
  return (m * m + 9) / 10;
}

CandidatePathSet build_candidates(const NetworkGraph& graph, Scope scope, std::size_t k) {
  if (k < 1) raise(Errc::InvalidRange, "k must be at least 1");
  const LinkWeights hops = hop_weights(graph);
  CandidatePathSet out(k, PathMatrix(graph, scope));
  const auto nodes = out.front().nodes();
  for (NodeIndex src : nodes) {
    for (NodeIndex dst : nodes) {
      if (src == dst) continue;
      const auto paths = yen_k_shortest(graph, src, dst, k, hops, scope);
      for (std::size_t j = 0; j < k; ++j) out[j].set_path(src, dst, paths[std::min(j, paths.size() - 1)]);
    }
  }
  return out;
}

}  // namespace xdr
