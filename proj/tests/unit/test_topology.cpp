#include <doctest.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"

using namespace xdr;
using namespace testutil;

TEST_CASE("triangle in one domain") {
  const NetworkGraph g = triangle();
  CHECK(g.node_count() == 3);
  CHECK(g.edge_count() == 3);
  CHECK(g.domain_count() == 1);
  CHECK(border_links(g).empty());
}

TEST_CASE("nodes are stored in identifier order") {
  const NetworkGraph g = make_graph({"c", "a", "b"}, {{"c", "a", 5, 1}, {"a", "b", 5, 1}}, one_domain({"a", "b", "c"}));
  CHECK(g.nodes() == std::vector<std::string>{"a", "b", "c"});
  for (const Edge& e : g.edges()) CHECK(e.u < e.v);
}

TEST_CASE("construction errors") {
  CHECK(throws_code([] { make_graph({"a", "b"}, {{"a", "s99", 1, 1}}, one_domain({"a", "b"})); }, Errc::DanglingEdge));
  CHECK(throws_code([] { make_graph({"a", "b", "c"}, {{"a", "b", 1, 1}}, one_domain({"a", "b", "c"})); },
                    Errc::DisconnectedGraph));
  CHECK(throws_code([] { make_graph({}, {}, {}); }, Errc::MalformedConfig));
  CHECK(throws_code([] { make_graph({"a", "a"}, {}, one_domain({"a"})); }, Errc::MalformedConfig));
  CHECK(throws_code([] { make_graph({"a", "b"}, {{"a", "b", 0, 1}}, one_domain({"a", "b"})); },
                    Errc::MalformedConfig));
  CHECK(throws_code([] { load_topology("{not json"); }, Errc::MalformedConfig));
  CHECK(throws_code(
      [] { load_topology(R"({"nodes":["a"],"edges":[{"u":"a","v":"s99","capacity_mbit":1,"base_delay_ms":1}],"domains":{"a":1}})"); },
      Errc::DanglingEdge));
}

TEST_CASE("border links of small graphs") {
  CHECK(border_links(triangle()).empty());
  const NetworkGraph g = two_domains();
  const auto borders = border_links(g);
  REQUIRE(borders.size() == 1);
  const Edge& e = g.edge(borders[0].edge);
  CHECK(g.node_id(e.u) == "b");
  CHECK(g.node_id(e.v) == "c");
  CHECK(borders[0].domain_a == 1);
  CHECK(borders[0].domain_b == 2);
  CHECK(e.attr.domain_edge);
}

TEST_CASE("fixture shape and capped domain") {
  const NetworkGraph g = fixture();
  CHECK(g.node_count() == 39);
  CHECK(g.domain_count() == 3);
  for (DomainId d : g.domain_ids()) CHECK(g.domain_nodes(d).size() == 13);
  for (const Edge& e : g.edges()) {
    CHECK(e.attr.capacity_mbit >= 1.0);
    CHECK(e.attr.capacity_mbit <= 10.0);
    const bool intra1 = g.domain_of(e.u) == 1 && g.domain_of(e.v) == 1;
    if (intra1) CHECK(e.attr.capacity_mbit <= 5.0);
  }
}

TEST_CASE("border links match a brute-force scan") {
  const NetworkGraph g = fixture();
  std::vector<EdgeIndex> scan;
  for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
    if (g.domain_of(g.edge(e).u) != g.domain_of(g.edge(e).v)) scan.push_back(e);
  }
  std::vector<EdgeIndex> got;
  for (const BorderLink& b : border_links(g)) got.push_back(b.edge);
  CHECK(got == scan);
}

TEST_CASE("intra-domain edges and border links partition E") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const NetworkGraph g = generate_experiment_topology(seed, {4, 6, 5}, {1.0, 10.0}, std::nullopt);
    std::set<EdgeIndex> seen;
    for (DomainId d : g.domain_ids()) {
      for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        if (g.domain_of(g.edge(e).u) == d && g.domain_of(g.edge(e).v) == d) CHECK(seen.insert(e).second);
      }
    }
    for (const BorderLink& b : border_links(g)) CHECK(seen.insert(b.edge).second);
    CHECK(seen.size() == g.edge_count());
  }
}

TEST_CASE("generator is a pure function of its arguments") {
  CHECK(serialize_topology(fixture()) == serialize_topology(fixture()));
  const NetworkGraph other = generate_experiment_topology(8, {13, 13, 13}, {1.0, 10.0}, CappedDomain{1, 5.0});
  CHECK(serialize_topology(other) != serialize_topology(fixture()));
}

TEST_CASE("generator argument errors") {
  CHECK(throws_code([] { generate_experiment_topology(7, {13}, {10.0, 1.0}, std::nullopt); }, Errc::InvalidRange));
  CHECK(throws_code([] { generate_experiment_topology(7, {}, {1.0, 10.0}, std::nullopt); }, Errc::EmptyDomain));
  CHECK(throws_code([] { generate_experiment_topology(7, {3, 0}, {1.0, 10.0}, std::nullopt); }, Errc::EmptyDomain));
}

TEST_CASE("serialization round-trips on random topologies") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    std::mt19937_64 rng(seed);
    const int domains = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<int> sizes;
    for (int i = 0; i < domains; ++i) sizes.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
    const NetworkGraph g = generate_experiment_topology(seed, sizes, {1.0, 10.0}, std::nullopt);
    const std::string text = serialize_topology(g);
    const NetworkGraph back = load_topology(text);
    CHECK(back == g);
    CHECK(serialize_topology(back) == text);
  }
}

TEST_CASE("serialized document uses sorted keys") {
  const auto doc = nlohmann::json::parse(serialize_topology(two_domains()));
  CHECK(doc.at("nodes").size() == 4);
  CHECK(doc.at("domains").at("c") == 2);
  const auto& e0 = doc.at("edges").at(0);
  CHECK(e0.contains("capacity_mbit"));
  CHECK(e0.contains("base_delay_ms"));
}

TEST_CASE("scope views") {
  const NetworkGraph g = fixture();
  const ScopeView d1 = make_scope_view(g, Scope::of_domain(1));
  CHECK(d1.size() == 13);
  for (EdgeIndex e : d1.links) {
    CHECK(g.domain_of(g.edge(e).u) == 1);
    CHECK(g.domain_of(g.edge(e).v) == 1);
  }
  const ScopeView border = make_scope_view(g, Scope::border());
  CHECK(border.size() == 39);
  CHECK(border.links.size() == border_links(g).size());
  CHECK(make_scope_view(g, Scope::global()).links.size() == g.edge_count());
  CHECK(throws_code([&] { make_scope_view(g, Scope::of_domain(9)); }, Errc::ScopeMismatch));
}

TEST_CASE("scope labels") {
  CHECK(Scope::global().label() == "global");
  CHECK(Scope::border().label() == "border");
  CHECK(Scope::of_domain(2).label() == "domain2");
  CHECK(Scope::parse("domain3") == Scope::of_domain(3));
  CHECK(Scope::parse("global") == Scope::global());
  CHECK(throws_code([] { Scope::parse("galaxy"); }, Errc::MalformedConfig));
}

TEST_CASE("simple path checks") {
  const NetworkGraph g = line3();
  CHECK(is_simple_path(g, std::vector<NodeIndex>{0, 1, 2}, 0, 2));
  CHECK_FALSE(is_simple_path(g, std::vector<NodeIndex>{0, 2}, 0, 2));
  CHECK_FALSE(is_simple_path(g, std::vector<NodeIndex>{0, 1, 0}, 0, 0));
  CHECK(is_simple_path(g, std::vector<NodeIndex>{1}, 1, 1));
  CHECK(path_edges(g, std::vector<NodeIndex>{0, 1, 2}).size() == 2);
  CHECK(throws_code([&] { path_edges(g, std::vector<NodeIndex>{0, 2}); }, Errc::InvalidPath));
}
