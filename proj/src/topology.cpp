#include "xdr/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdr/error.hpp"

namespace xdr {

using nlohmann::json;

namespace {

bool connected_subset(const std::vector<std::vector<Neighbor>>& adjacency,
                      const std::vector<bool>& member) {
  const auto first = std::find(member.begin(), member.end(), true);
  if (first == member.end()) return true;
  std::vector<bool> seen(member.size(), false);
  std::queue<NodeIndex> frontier;
  const auto start = static_cast<NodeIndex>(first - member.begin());
  frontier.push(start);
  seen[start] = true;
  while (!frontier.empty()) {
    const NodeIndex n = frontier.front();
    frontier.pop();
    for (const auto& nb : adjacency[n]) {
      if (member[nb.node] && !seen[nb.node]) {
        seen[nb.node] = true;
        frontier.push(nb.node);
      }
    }
  }
  for (std::size_t i = 0; i < member.size(); ++i) {
    if (member[i] && !seen[i]) return false;
  }
  return true;
}

// Nearest tenth, as the double closest to k / 10.
double round_tenth(double value) { return std::round(value * 10.0) / 10.0; }

}  // namespace

NetworkGraph NetworkGraph::create(std::vector<std::string> nodes, const std::vector<EdgeSpec>& edges,
                                  const std::vector<std::pair<std::string, DomainId>>& domains) {
  if (nodes.empty()) raise(Errc::MalformedConfig, "topology has no nodes");
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    raise(Errc::MalformedConfig, "duplicate node identifier");
  }

  NetworkGraph g;
  g.nodes_ = std::move(nodes);
  const std::size_t n = g.nodes_.size();

  g.domain_of_.assign(n, 0);
  for (const auto& [id, d] : domains) {
    const auto idx = g.find(id);
    if (!idx) raise(Errc::DanglingEdge, "domain entry for unknown node '" + id + "'");
    if (d < 1) raise(Errc::MalformedConfig, "domain ids start at 1 (node '" + id + "')");
    if (g.domain_of_[*idx] != 0 && g.domain_of_[*idx] != d) {
      raise(Errc::MalformedConfig, "node '" + id + "' assigned to two domains");
    }
    g.domain_of_[*idx] = d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (g.domain_of_[i] == 0) raise(Errc::MalformedConfig, "node '" + g.nodes_[i] + "' has no domain");
  }
  const DomainId max_domain = *std::max_element(g.domain_of_.begin(), g.domain_of_.end());
  for (DomainId d = 1; d <= max_domain; ++d) {
    if (std::find(g.domain_of_.begin(), g.domain_of_.end(), d) == g.domain_of_.end()) {
      raise(Errc::EmptyDomain, "domain " + std::to_string(d) + " has no nodes");
    }
    g.domain_ids_.push_back(d);
  }

  std::set<std::pair<NodeIndex, NodeIndex>> seen_pairs;
  for (const auto& spec : edges) {
    const auto a = g.find(spec.u);
    const auto b = g.find(spec.v);
    if (!a) raise(Errc::DanglingEdge, "edge references unknown node '" + spec.u + "'");
    if (!b) raise(Errc::DanglingEdge, "edge references unknown node '" + spec.v + "'");
    if (*a == *b) raise(Errc::MalformedConfig, "self-loop at '" + spec.u + "'");
    if (!(spec.capacity_mbit > 0.0)) {
      raise(Errc::MalformedConfig, "capacity must be positive on " + spec.u + "-" + spec.v);
    }
    if (!(spec.base_delay_ms >= 0.0)) {
      raise(Errc::MalformedConfig, "base delay must be non-negative on " + spec.u + "-" + spec.v);
    }
    Edge e;
    e.u = std::min(*a, *b);
    e.v = std::max(*a, *b);
    if (!seen_pairs.insert({e.u, e.v}).second) {
      raise(Errc::MalformedConfig, "duplicate edge " + spec.u + "-" + spec.v);
    }
    e.attr.capacity_mbit = spec.capacity_mbit;
    e.attr.base_delay_ms = spec.base_delay_ms;
    e.attr.domain_edge = g.domain_of_[e.u] != g.domain_of_[e.v];
    g.edges_.push_back(e);
  }
  std::sort(g.edges_.begin(), g.edges_.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });

  g.adjacency_.assign(n, {});
  for (EdgeIndex ei = 0; ei < g.edges_.size(); ++ei) {
    const auto& e = g.edges_[ei];
    g.adjacency_[e.u].push_back({e.v, ei});
    g.adjacency_[e.v].push_back({e.u, ei});
  }
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end(), [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
  }

  if (!connected_subset(g.adjacency_, std::vector<bool>(n, true))) {
    raise(Errc::DisconnectedGraph, "topology is not connected");
  }
  for (DomainId d : g.domain_ids_) {
    std::vector<bool> member(n);
    for (std::size_t i = 0; i < n; ++i) member[i] = g.domain_of_[i] == d;
    if (!connected_subset(g.adjacency_, member)) {
      raise(Errc::DisconnectedGraph, "domain " + std::to_string(d) + " is not internally connected");
    }
  }
  return g;
}

std::optional<NodeIndex> NetworkGraph::find(std::string_view id) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
  if (it == nodes_.end() || *it != id) return std::nullopt;
  return static_cast<NodeIndex>(it - nodes_.begin());
}

NodeIndex NetworkGraph::index_of(std::string_view id) const {
  const auto idx = find(id);
  if (!idx) raise(Errc::DanglingEdge, "unknown node '" + std::string(id) + "'");
  return *idx;
}

std::optional<EdgeIndex> NetworkGraph::edge_between(NodeIndex a, NodeIndex b) const {
  if (a >= adjacency_.size() || b >= adjacency_.size()) return std::nullopt;
  const auto& list = adjacency_[a];
  const auto it = std::lower_bound(list.begin(), list.end(), b,
                                   [](const Neighbor& nb, NodeIndex x) { return nb.node < x; });
  if (it == list.end() || it->node != b) return std::nullopt;
  return it->edge;
}

std::vector<NodeIndex> NetworkGraph::domain_nodes(DomainId d) const {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < domain_of_.size(); ++i) {
    if (domain_of_[i] == d) out.push_back(i);
  }
  return out;
}

std::size_t NetworkGraph::largest_domain_size() const {
  std::size_t best = 0;
  for (DomainId d : domain_ids_) best = std::max(best, domain_nodes(d).size());
  return best;
}

std::vector<BorderLink> border_links(const NetworkGraph& graph) {
  std::vector<BorderLink> out;
  const auto& edges = graph.edges();
  for (EdgeIndex ei = 0; ei < edges.size(); ++ei) {
    const auto& e = edges[ei];
    const DomainId a = graph.domain_of(e.u);
    const DomainId b = graph.domain_of(e.v);
    if (a != b) out.push_back({ei, a, b});
  }
  return out;
}

NetworkGraph topology_from_json(const json& doc) {
  try {
    if (!doc.is_object()) raise(Errc::MalformedConfig, "topology document must be an object");
    std::vector<std::string> nodes = doc.at("nodes").get<std::vector<std::string>>();
    std::vector<EdgeSpec> edges;
    for (const auto& e : doc.at("edges")) {
      edges.push_back({e.at("u").get<std::string>(), e.at("v").get<std::string>(),
                       e.at("capacity_mbit").get<double>(), e.at("base_delay_ms").get<double>()});
    }
    std::vector<std::pair<std::string, DomainId>> domains;
    for (const auto& [id, d] : doc.at("domains").items()) domains.emplace_back(id, d.get<DomainId>());
    return NetworkGraph::create(std::move(nodes), edges, domains);
  } catch (const json::exception& ex) {
    raise(Errc::MalformedConfig, ex.what());
  }
}

NetworkGraph load_topology(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& ex) {
    raise(Errc::MalformedConfig, ex.what());
  }
  return topology_from_json(doc);
}

NetworkGraph load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::Io, "cannot open topology file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_topology(buffer.str());
}

json topology_to_json(const NetworkGraph& graph) {
  json doc;
  doc["nodes"] = graph.nodes();
  json edges = json::array();
  for (const auto& e : graph.edges()) {
    edges.push_back({{"u", graph.node_id(e.u)},
                     {"v", graph.node_id(e.v)},
                     {"capacity_mbit", e.attr.capacity_mbit},
                     {"base_delay_ms", e.attr.base_delay_ms}});
  }
  doc["edges"] = std::move(edges);
  json domains = json::object();
  for (NodeIndex i = 0; i < graph.node_count(); ++i) domains[graph.node_id(i)] = graph.domain_of(i);
  doc["domains"] = std::move(domains);
  return doc;
}

std::string serialize_topology(const NetworkGraph& graph) { return topology_to_json(graph).dump(2) + "\n"; }

NetworkGraph generate_experiment_topology(std::uint64_t seed, const std::vector<int>& domain_sizes,
                                          std::pair<double, double> bw_range_mbit,
                                          std::optional<CappedDomain> capped_domain,
                                          const TopologyGenOptions& options) {
  const auto [bw_min, bw_max] = bw_range_mbit;
  if (!(bw_min >= 1.0) || !(bw_max >= bw_min)) {
    raise(Errc::InvalidRange, "bandwidth range must satisfy 1 <= min <= max");
  }
  const auto [d_min, d_max] = options.delay_range_ms;
  if (!(d_min >= 0.0) || !(d_max >= d_min)) raise(Errc::InvalidRange, "delay range must satisfy 0 <= min <= max");
  if (domain_sizes.empty()) raise(Errc::EmptyDomain, "no domains requested");
  for (int s : domain_sizes) {
    if (s <= 0) raise(Errc::EmptyDomain, "domain sizes must be positive");
  }
  if (capped_domain && !(capped_domain->cap_mbit > 0.0)) raise(Errc::InvalidRange, "cap must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bw(bw_min, bw_max);
  std::uniform_real_distribution<double> delay(d_min, d_max);

  const int total = std::accumulate(domain_sizes.begin(), domain_sizes.end(), 0);
  const int width = static_cast<int>(std::to_string(total).size());
  auto name = [width](int i) {
    std::string digits = std::to_string(i + 1);
    return "s" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
  };

  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, DomainId>> domains;
  std::vector<std::vector<int>> members(domain_sizes.size());
  for (int i = 0, d = 0, in_domain = 0; i < total; ++i) {
    while (in_domain == domain_sizes[static_cast<std::size_t>(d)]) {
      ++d;
      in_domain = 0;
    }
    nodes.push_back(name(i));
    domains.emplace_back(name(i), d + 1);
    members[static_cast<std::size_t>(d)].push_back(i);
    ++in_domain;
  }

  std::set<std::pair<int, int>> pairs;
  std::vector<EdgeSpec> edges;
  auto add_edge = [&](int a, int b, DomainId capped_in) {
    if (a > b) std::swap(a, b);
    if (a == b || !pairs.insert({a, b}).second) return false;
    double capacity = round_tenth(bw(rng));
    capacity = std::clamp(capacity, bw_min, bw_max);
    if (capped_domain && capped_in == capped_domain->domain) capacity = std::min(capacity, capped_domain->cap_mbit);
    const double base_delay = std::max(d_min, round_tenth(delay(rng)));
    edges.push_back({name(a), name(b), capacity, base_delay});
    return true;
  };

  for (std::size_t d = 0; d < members.size(); ++d) {
    auto order = members[d];
    std::shuffle(order.begin(), order.end(), rng);
    const auto domain = static_cast<DomainId>(d + 1);
    for (std::size_t i = 1; i < order.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      add_edge(order[i], order[pick(rng)], domain);
    }
    const auto n = static_cast<int>(order.size());
    const int max_edges = n * (n - 1) / 2;
    const int wanted = std::min(max_edges, (n - 1) + static_cast<int>(std::lround(options.extra_edge_ratio * n)));
    int have = n - 1;
    std::uniform_int_distribution<std::size_t> any(0, order.size() - 1);
    for (int attempts = 0; have < wanted && attempts < 100 * n; ++attempts) {
      if (add_edge(order[any(rng)], order[any(rng)], domain)) ++have;
    }
  }

  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = a + 1; b < members.size(); ++b) {
      const auto possible = static_cast<int>(members[a].size() * members[b].size());
      const int wanted = std::min(options.border_links_per_pair, possible);
      std::uniform_int_distribution<std::size_t> pa(0, members[a].size() - 1);
      std::uniform_int_distribution<std::size_t> pb(0, members[b].size() - 1);
      for (int have = 0, attempts = 0; have < wanted && attempts < 1000; ++attempts) {
        if (add_edge(members[a][pa(rng)], members[b][pb(rng)], 0)) ++have;
      }
    }
  }
  return NetworkGraph::create(std::move(nodes), edges, domains);
}

std::string Scope::label() const {
  switch (kind) {
    case Kind::Global: return "global";
    case Kind::Border: return "border";
    case Kind::Domain: return "domain" + std::to_string(domain);
  }
  return "global";
}

Scope Scope::parse(std::string_view label) {
  if (label == "global" || label == "root") return global();
  if (label == "border") return border();
  constexpr std::string_view prefix = "domain";
  if (label.substr(0, prefix.size()) == prefix && label.size() > prefix.size()) {
    try {
      return of_domain(std::stoi(std::string(label.substr(prefix.size()))));
    } catch (const std::exception&) {
    }
  }
  raise(Errc::MalformedConfig, "unknown scope '" + std::string(label) + "'");
}

ScopeView make_scope_view(const NetworkGraph& graph, Scope scope) {
  ScopeView view;
  view.scope = scope;
  view.local_of.assign(graph.node_count(), -1);
  if (scope.kind == Scope::Kind::Domain) {
    view.nodes = graph.domain_nodes(scope.domain);
    if (view.nodes.empty()) raise(Errc::ScopeMismatch, "no such domain " + std::to_string(scope.domain));
  } else {
    view.nodes.resize(graph.node_count());
    std::iota(view.nodes.begin(), view.nodes.end(), NodeIndex{0});
  }
  for (std::size_t i = 0; i < view.nodes.size(); ++i) view.local_of[view.nodes[i]] = static_cast<int>(i);
  const auto& edges = graph.edges();
  for (EdgeIndex ei = 0; ei < edges.size(); ++ei) {
    const auto& e = edges[ei];
    bool in = false;
    switch (scope.kind) {
      case Scope::Kind::Global: in = true; break;
      case Scope::Kind::Border: in = e.attr.domain_edge; break;
      case Scope::Kind::Domain:
        in = graph.domain_of(e.u) == scope.domain && graph.domain_of(e.v) == scope.domain;
        break;
    }
    if (in) view.links.push_back(ei);
  }
  return view;
}

}  // namespace xdr

namespace xdr {

bool is_simple_path(const NetworkGraph& graph, std::span<const NodeIndex> path, NodeIndex src, NodeIndex dst) {
  if (path.empty() || path.front() != src || path.back() != dst) return false;
  std::vector<bool> seen(graph.node_count(), false);
  for (std::size_t i = 0; i < path.size(); ++i) {
    const NodeIndex n = path[i];
    if (n >= graph.node_count() || seen[n]) return false;
    seen[n] = true;
    if (i > 0 && !graph.edge_between(path[i - 1], n)) return false;
  }
  return true;
}

std::vector<EdgeIndex> path_edges(const NetworkGraph& graph, std::span<const NodeIndex> path) {
  std::vector<EdgeIndex> out;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto e = graph.edge_between(path[i - 1], path[i]);
    if (!e) raise(Errc::InvalidPath, "no link between consecutive path nodes");
    out.push_back(*e);
  }
  return out;
}

std::string format_path(const NetworkGraph& graph, std::span<const NodeIndex> path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += ' ';
    out += graph.node_id(path[i]);
  }
  return out;
}

}  // namespace xdr
