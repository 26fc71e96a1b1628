#include <doctest.h>

#include "helpers.hpp"
#include "xdr/netsim.hpp"

using namespace xdr;
using namespace testutil;

namespace {

SimParams quiet() {
  SimParams p;
  p.error_probability = 0.0;
  p.probe_jitter_ms = 0.0;
  return p;
}

// Two nodes, one link.
NetworkGraph pair_graph(double cap, double delay) {
  return make_graph({"a", "b"}, {{"a", "b", cap, delay}}, one_domain({"a", "b"}));
}

}  // namespace

TEST_CASE("fresh simulator is idle") {
  SimState sim(shared(fixture()), 1);
  for (const LinkRuntime& l : sim.links()) CHECK(l.used_bw_mbit == 0.0);
  sim.step();
  for (EdgeIndex e = 0; e < sim.graph().edge_count(); ++e) {
    CHECK(sim.link(e).loss() == 0.0);
    CHECK(sim.link(e).measured_delay_ms == sim.graph().edge(e).attr.base_delay_ms);
  }
}

TEST_CASE("single flow on a free link") {
  SimState sim(shared(pair_graph(10, 2)), 1, quiet());
  sim.assign_flow({0, 1, 3.0}, {0, 1});
  sim.step();
  CHECK(sim.link(0).used_bw_mbit == doctest::Approx(3.0));
  CHECK(sim.link(0).drops == 0);
}

TEST_CASE("shared link adds loads") {
  SimState sim(shared(pair_graph(10, 2)), 1, quiet());
  sim.assign_flow({0, 1, 4.0}, {0, 1});
  sim.assign_flow({1, 0, 4.0}, {1, 0});
  sim.step();
  CHECK(sim.link(0).used_bw_mbit == doctest::Approx(8.0));
}

TEST_CASE("overload drops the excess") {
  SimState sim(shared(pair_graph(10, 2)), 1, quiet());
  sim.assign_flow({0, 1, 12.0}, {0, 1});
  sim.step();
  const LinkRuntime& l = sim.link(0);
  CHECK(l.used_bw_mbit == doctest::Approx(10.0));
  CHECK(l.loss() == doctest::Approx(2.0 / 12.0).epsilon(1e-3));
  CHECK(l.measured_delay_ms == doctest::Approx(2.0 * (1.0 + 0.99 / 0.01)));
}

TEST_CASE("half utilization doubles the delay") {
  SimState sim(shared(pair_graph(10, 3)), 1, quiet());
  sim.assign_flow({0, 1, 5.0}, {0, 1});
  sim.step();
  CHECK(sim.link(0).measured_delay_ms == doctest::Approx(6.0));
}

TEST_CASE("invalid paths are rejected") {
  SimState sim(shared(line3()), 1);
  CHECK(throws_code([&] { sim.assign_flow({0, 0, 1.0}, {0, 1, 0}); }, Errc::InvalidPath));
  CHECK(throws_code([&] { sim.assign_flow({0, 2, 1.0}, {0, 2}); }, Errc::InvalidPath));
  CHECK(throws_code([&] { sim.assign_flow({0, 2, 1.0}, {0, 1}); }, Errc::InvalidPath));
}

TEST_CASE("flows respect their active window") {
  SimState sim(shared(pair_graph(10, 1)), 1, quiet());
  FlowDemand d{0, 1, 2.0};
  d.start_tick = 1;
  d.end_tick = 2;
  sim.assign_flow(d, {0, 1});
  sim.step();
  CHECK(sim.link(0).offered_mbit == 0.0);
  sim.step();
  CHECK(sim.link(0).offered_mbit == doctest::Approx(2.0));
  sim.step();
  CHECK(sim.link(0).offered_mbit == 0.0);
}

TEST_CASE("conservation, capacity and loss bounds under random traffic") {
  auto g = shared(fixture());
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimState sim(g, seed);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<NodeIndex> pick(0, static_cast<NodeIndex>(g->node_count() - 1));
    std::uniform_real_distribution<double> rate(0.1, 12.0);
    const LinkWeights w = hop_weights(*g);
    for (int i = 0; i < 60; ++i) {
      const NodeIndex s = pick(rng);
      NodeIndex t = pick(rng);
      if (s == t) t = (t + 1) % g->node_count();
      sim.assign_flow({s, t, rate(rng)}, shortest_path(*g, s, t, w));
    }
    for (int step = 0; step < 5; ++step) {
      sim.step();
      for (EdgeIndex e = 0; e < g->edge_count(); ++e) {
        const LinkRuntime& l = sim.link(e);
        CHECK(l.rx_pkts + l.drops == l.tx_pkts);
        CHECK(l.used_bw_mbit <= g->edge(e).attr.capacity_mbit);
        CHECK(l.loss() >= 0.0);
        CHECK(l.loss() <= 1.0);
        CHECK(l.errors <= l.rx_pkts);
      }
    }
  }
}

TEST_CASE("raising one flow's rate never lowers offered load") {
  auto g = shared(fixture());
  const LinkWeights w = hop_weights(*g);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<NodeIndex> pick(0, 38);
  std::vector<FlowDemand> demands;
  std::vector<Path> paths;
  for (int i = 0; i < 20; ++i) {
    const NodeIndex s = pick(rng);
    const NodeIndex t = (s + 1 + pick(rng) % 38) % 39;
    demands.push_back({s, t, 2.0});
    paths.push_back(shortest_path(*g, s, t, w));
  }
  auto run = [&](double bump) {
    SimState sim(g, 1);
    for (std::size_t i = 0; i < demands.size(); ++i) {
      FlowDemand d = demands[i];
      if (i == 0) d.rate_mbit += bump;
      sim.assign_flow(d, paths[i]);
    }
    sim.step();
    return sim.links();
  };
  const auto base = run(0.0);
  const auto more = run(3.0);
  for (EdgeIndex e = 0; e < g->edge_count(); ++e) CHECK(more[e].offered_mbit >= base[e].offered_mbit);
}

TEST_CASE("same seed and schedule give identical trajectories") {
  auto g = shared(fixture());
  const LinkWeights w = hop_weights(*g);
  auto run = [&] {
    SimState sim(g, 42);
    for (NodeIndex s = 0; s < 10; ++s) sim.assign_flow({s, s + 20, 6.0}, shortest_path(*g, s, s + 20, w));
    std::vector<std::vector<LinkRuntime>> out;
    for (int i = 0; i < 4; ++i) {
      sim.step();
      out.push_back(sim.links());
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("intra-domain probe recovers the measured delay") {
  SimState sim(shared(two_domains(10, 4)), 1, quiet());
  sim.step();
  const IntraDelayProbe p = sim.probe_intradomain_delay(0, 1);
  CHECK(p.ta_ns == 1000000);
  CHECK(p.tb_ns == 1000000);
  CHECK(p.t1_ns == 5000000);
  CHECK(p.recovered_delay_ms() == 4.0);
  CHECK(throws_code([&] { sim.probe_intradomain_delay(1, 2); }, Errc::NotIntraDomain));
  CHECK(throws_code([&] { sim.probe_intradomain_delay(0, 3); }, Errc::UnknownLink));
}

TEST_CASE("border probe recovers the measured delay") {
  SimState sim(shared(two_domains(10, 6)), 1, quiet());
  sim.step();
  const InterDelayProbe p = sim.probe_interdomain_delay(1, 2);
  CHECK(p.t_inter1_ns == 6000000);
  CHECK(p.t_inter2_ns == 6000000);
  CHECK(p.recovered_delay_ms() == 6.0);
  CHECK(throws_code([&] { sim.probe_interdomain_delay(0, 1); }, Errc::NotInterDomain));
}

TEST_CASE("zero-jitter probes equal measured delay on loaded fixture links") {
  auto g = shared(fixture());
  const LinkWeights w = hop_weights(*g);
  SimState sim(g, 5, quiet());
  for (NodeIndex s = 0; s < 19; ++s) sim.assign_flow({s, 38 - s, 3.5}, shortest_path(*g, s, 38 - s, w));
  sim.step();
  for (EdgeIndex e = 0; e < g->edge_count(); ++e) CHECK(sim.probe_delay(e) == sim.link(e).measured_delay_ms);
}

TEST_CASE("odd echo round trips still recover exactly") {
  SimParams params = quiet();
  params.echo_rtt_ms = 0.000003;
  SimState sim(shared(two_domains(10, 2.5)), 1, params);
  sim.step();
  CHECK(sim.probe_delay(0) == 2.5);
}

TEST_CASE("jittered probes stay near the measured delay") {
  auto g = shared(fixture());
  SimState sim(g, 5);
  sim.step();
  for (EdgeIndex e = 0; e < g->edge_count(); ++e) {
    CHECK(std::abs(sim.probe_delay(e) - sim.link(e).measured_delay_ms) <= sim.params().probe_jitter_ms + 1e-12);
  }
}

TEST_CASE("demand schedule round trip") {
  const NetworkGraph g = triangle();
  std::vector<FlowDemand> d{{0, 2, 1.5, 0, 4}, {1, 0, 3.0, 2, 9}};
  const auto back = load_demand_schedule(g, serialize_demand_schedule(g, d));
  REQUIRE(back.size() == 2);
  CHECK(back[1].src == 1);
  CHECK(back[1].rate_mbit == 3.0);
  CHECK(back[1].end_tick == 9);
  CHECK(throws_code([&] { load_demand_schedule(g, R"([{"src":"a","dst":"a","rate_mbit":1,"start_tick":0,"end_tick":1}])"); },
                    Errc::MalformedConfig));
}

TEST_CASE("reroute and remove flows") {
  SimState sim(shared(triangle()), 1, quiet());
  const FlowId id = sim.assign_flow({0, 2, 2.0}, {0, 2});
  sim.reroute_flow(id, {0, 1, 2});
  sim.step();
  CHECK(sim.link(*sim.graph().edge_between(0, 2)).offered_mbit == 0.0);
  CHECK(sim.link(*sim.graph().edge_between(0, 1)).offered_mbit == doctest::Approx(2.0));
  sim.remove_flow(id);
  sim.step();
  CHECK(sim.link(*sim.graph().edge_between(0, 1)).offered_mbit == 0.0);
}
