#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xdr {

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;
using DomainId = int;

struct LinkAttr {
  double capacity_mbit = 0.0;
  double base_delay_ms = 0.0;
  bool domain_edge = false;  // endpoints lie in different domains

  bool operator==(const LinkAttr&) const = default;
};

// Undirected link; u < v in canonical index order.
struct Edge {
  NodeIndex u = 0;
  NodeIndex v = 0;
  LinkAttr attr;

  NodeIndex other(NodeIndex n) const noexcept { return n == u ? v : u; }

  bool operator==(const Edge&) const = default;
};

// Link description by node identifier, used when building a graph.
struct EdgeSpec {
  std::string u;
  std::string v;
  double capacity_mbit = 0.0;
  double base_delay_ms = 0.0;
};

struct Neighbor {
  NodeIndex node;
  EdgeIndex edge;

  bool operator==(const Neighbor&) const = default;
};

// The switch-level topology with its domain partition. Nodes are stored in
// lexicographic identifier order and that order is the matrix index order
// used everywhere downstream. Immutable once built.
class NetworkGraph {
 public:
  // Validates and canonicalizes. Throws MalformedConfig, DanglingEdge,
  // DisconnectedGraph or EmptyDomain.
  static NetworkGraph create(std::vector<std::string> nodes, const std::vector<EdgeSpec>& edges,
                             const std::vector<std::pair<std::string, DomainId>>& domains);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::string& node_id(NodeIndex n) const { return nodes_.at(n); }
  std::optional<NodeIndex> find(std::string_view id) const;
  NodeIndex index_of(std::string_view id) const;  // throws DanglingEdge

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
  std::optional<EdgeIndex> edge_between(NodeIndex a, NodeIndex b) const;

  std::span<const Neighbor> neighbors(NodeIndex n) const { return adjacency_.at(n); }

  DomainId domain_of(NodeIndex n) const { return domain_of_.at(n); }
  const std::vector<DomainId>& domain_ids() const noexcept { return domain_ids_; }
  std::size_t domain_count() const noexcept { return domain_ids_.size(); }
  // Nodes of one domain in canonical order.
  std::vector<NodeIndex> domain_nodes(DomainId d) const;
  std::size_t largest_domain_size() const;

  // Hop weight W; the experiments fix it to 1.
  static constexpr double kLinkWeight = 1.0;

  bool operator==(const NetworkGraph&) const = default;

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<DomainId> domain_of_;
  std::vector<DomainId> domain_ids_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

struct BorderLink {
  EdgeIndex edge;
  DomainId domain_a;  // domain of edge.u
  DomainId domain_b;  // domain of edge.v
};

// Links whose endpoints lie in different domains, in edge index order.
std::vector<BorderLink> border_links(const NetworkGraph& graph);

// Topology document <-> graph. The canonical form sorts keys and lists nodes
// and edges in index order, so load_topology(serialize_topology(g)) == g.
NetworkGraph load_topology(std::string_view json_text);
NetworkGraph load_topology_file(const std::string& path);
NetworkGraph topology_from_json(const nlohmann::json& doc);
nlohmann::json topology_to_json(const NetworkGraph& graph);
std::string serialize_topology(const NetworkGraph& graph);

struct CappedDomain {
  DomainId domain = 1;
  double cap_mbit = 5.0;
};

struct TopologyGenOptions {
  double extra_edge_ratio = 0.5;       // chords per node added on top of a spanning tree
  int border_links_per_pair = 2;       // links between every pair of domains
  std::pair<double, double> delay_range_ms{1.0, 5.0};
};

// Seeded generator for the experiment topology: one connected random graph
// per domain, joined by a few border links. Intra-domain links of the capped
// domain are limited to min(capacity, cap); border links are never capped.
// Throws InvalidRange or EmptyDomain.
NetworkGraph generate_experiment_topology(std::uint64_t seed, const std::vector<int>& domain_sizes,
                                          std::pair<double, double> bw_range_mbit,
                                          std::optional<CappedDomain> capped_domain,
                                          const TopologyGenOptions& options = {});

// Scope of a matrix: one domain, the whole network, or only its border links.
struct Scope {
  enum class Kind { Domain, Global, Border };
  Kind kind = Kind::Global;
  DomainId domain = 0;

  static Scope global() { return {Kind::Global, 0}; }
  static Scope border() { return {Kind::Border, 0}; }
  static Scope of_domain(DomainId d) { return {Kind::Domain, d}; }

  bool operator==(const Scope&) const = default;
  std::string label() const;  // "global", "border", "domain1", ...
  static Scope parse(std::string_view label);
};

// Node and link membership of a scope. Domain scopes index the domain's nodes
// only; global and border scopes index every node.
struct ScopeView {
  Scope scope;
  std::vector<NodeIndex> nodes;            // global index of each local row
  std::vector<int> local_of;               // global -> local, -1 when absent
  std::vector<EdgeIndex> links;            // links whose entries the scope carries

  std::size_t size() const noexcept { return nodes.size(); }
  bool contains(NodeIndex n) const { return local_of.at(n) >= 0; }
};

ScopeView make_scope_view(const NetworkGraph& graph, Scope scope);

// A node sequence through the graph, in global node indices.
using Path = std::vector<NodeIndex>;

// True when path starts at src, ends at dst, follows existing links and
// visits no node twice. A single-node path is valid only for src == dst.
bool is_simple_path(const NetworkGraph& graph, std::span<const NodeIndex> path, NodeIndex src, NodeIndex dst);

// Links traversed by a path, in order. Throws InvalidPath on a missing link.
std::vector<EdgeIndex> path_edges(const NetworkGraph& graph, std::span<const NodeIndex> path);

std::string format_path(const NetworkGraph& graph, std::span<const NodeIndex> path);

}  // namespace xdr
