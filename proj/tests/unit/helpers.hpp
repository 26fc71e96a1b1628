#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "xdr/error.hpp"
#include "xdr/routing.hpp"
#include "xdr/topology.hpp"

namespace testutil {

using namespace xdr;

inline NetworkGraph make_graph(const std::vector<std::string>& nodes, const std::vector<EdgeSpec>& edges,
                               const std::vector<std::pair<std::string, DomainId>>& domains) {
  return NetworkGraph::create(nodes, edges, domains);
}

inline std::vector<std::pair<std::string, DomainId>> one_domain(const std::vector<std::string>& nodes, DomainId d = 1) {
  std::vector<std::pair<std::string, DomainId>> out;
  for (const auto& n : nodes) out.emplace_back(n, d);
  return out;
}

// a-b-c triangle in domain 1.
inline NetworkGraph triangle(double cap = 10.0, double delay = 1.0) {
  return make_graph({"a", "b", "c"}, {{"a", "b", cap, delay}, {"b", "c", cap, delay}, {"a", "c", cap, delay}},
                    one_domain({"a", "b", "c"}));
}

// a-b-c line in domain 1.
inline NetworkGraph line3(double cap = 10.0, double delay = 1.0) {
  return make_graph({"a", "b", "c"}, {{"a", "b", cap, delay}, {"b", "c", cap, delay}}, one_domain({"a", "b", "c"}));
}

// Two 2-node domains joined by b-c: a,b in domain 1, c,d in domain 2.
inline NetworkGraph two_domains(double cap = 10.0, double delay = 1.0) {
  return make_graph({"a", "b", "c", "d"}, {{"a", "b", cap, delay}, {"b", "c", cap, delay}, {"c", "d", cap, delay}},
                    {{"a", 1}, {"b", 1}, {"c", 2}, {"d", 2}});
}

inline NetworkGraph fixture() {
  return generate_experiment_topology(7, {13, 13, 13}, {1.0, 10.0}, CappedDomain{1, 5.0});
}

inline std::shared_ptr<const NetworkGraph> shared(NetworkGraph g) {
  return std::make_shared<const NetworkGraph>(std::move(g));
}

// Random connected single-domain graph: a random spanning tree plus extra
// edges with probability p.
inline NetworkGraph random_connected(std::mt19937_64& rng, int n, double p) {
  std::vector<std::string> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back("n" + std::to_string(i));
  std::set<std::pair<int, int>> used;
  std::vector<EdgeSpec> edges;
  auto add = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    if (a == b || !used.insert({a, b}).second) return;
    edges.push_back({nodes[a], nodes[b], 10.0, 1.0});
  };
  for (int i = 1; i < n; ++i) add(i, std::uniform_int_distribution<int>(0, i - 1)(rng));
  std::bernoulli_distribution extra(p);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (extra(rng)) add(i, j);
    }
  }
  return make_graph(nodes, edges, one_domain(nodes));
}

// Every simple src -> dst path by depth-first search.
inline std::vector<Path> all_simple_paths(const NetworkGraph& g, NodeIndex src, NodeIndex dst) {
  std::vector<Path> out;
  Path cur{src};
  std::vector<bool> seen(g.node_count(), false);
  seen[src] = true;
  std::function<void(NodeIndex)> dfs = [&](NodeIndex u) {
    if (u == dst) {
      out.push_back(cur);
      return;
    }
    for (const Neighbor& nb : g.neighbors(u)) {
      if (seen[nb.node]) continue;
      seen[nb.node] = true;
      cur.push_back(nb.node);
      dfs(nb.node);
      cur.pop_back();
      seen[nb.node] = false;
    }
  };
  dfs(src);
  return out;
}

inline bool throws_code(const std::function<void()>& fn, Errc code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace testutil
