#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "xdr/topology.hpp"

namespace xdr {

using Tick = std::int64_t;
using FlowId = std::uint64_t;

struct FlowDemand {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  double rate_mbit = 0.0;  // offered rate
  Tick start_tick = 0;
  Tick end_tick = std::numeric_limits<Tick>::max();  // exclusive

  bool active_at(Tick t) const noexcept { return start_tick <= t && t < end_tick; }
};

// Counters of one link over the last simulated interval.
struct LinkRuntime {
  double offered_mbit = 0.0;
  double used_bw_mbit = 0.0;
  std::uint64_t tx_bytes = 0;
  std::uint64_t rx_bytes = 0;
  std::uint64_t tx_pkts = 0;
  std::uint64_t rx_pkts = 0;
  std::uint64_t drops = 0;
  std::uint64_t errors = 0;
  double measured_delay_ms = 0.0;  // whole nanoseconds

  double loss() const noexcept {
    return tx_pkts == 0 ? 0.0 : static_cast<double>(drops) / static_cast<double>(tx_pkts);
  }
  bool operator==(const LinkRuntime&) const = default;
};

struct SimParams {
  double queue_factor = 1.0;         // q in base * (1 + q u / (1 - u))
  double max_utilization = 0.99;     // u clamp
  double error_probability = 1e-4;   // per received packet
  double probe_jitter_ms = 0.1;      // uniform +-jitter on probe timestamps
  double echo_rtt_ms = 1.0;          // controller <-> switch echo round trip
  std::uint32_t packet_bytes = 1250;
};

// Read-only copy of every link's counters at a tick boundary.
struct SimSnapshot {
  std::shared_ptr<const NetworkGraph> graph;
  Tick tick = 0;          // clock after the interval the counters describe
  double interval_s = 1.0;
  std::vector<LinkRuntime> links;
};

struct FlowRuntime {
  FlowDemand demand;
  Path path;
  std::vector<EdgeIndex> edges;
  double delivered_mbit = 0.0;  // rate reaching dst during the last interval
};

// Probe timestamps are integer clock readings in nanoseconds, the resolution
// of the simulator clock, so the recovery below is exact arithmetic.
struct IntraDelayProbe {
  std::int64_t t1_ns;  // controller -> a -> b -> controller (LLDP)
  std::int64_t t2_ns;  // controller -> b -> a -> controller (LLDP)
  std::int64_t ta_ns;  // echo round trip to a
  std::int64_t tb_ns;  // echo round trip to b

  double recovered_delay_ms() const noexcept {
    return static_cast<double>(t1_ns + t2_ns - ta_ns - tb_ns) / 2.0 / 1e6;
  }
};

struct InterDelayProbe {
  std::int64_t t_inter1_ns;
  std::int64_t t_inter2_ns;

  double recovered_delay_ms() const noexcept { return static_cast<double>(t_inter1_ns + t_inter2_ns) / 2.0 / 1e6; }
};

// Discrete-time fluid model of flows over the graph. Link load is the sum of
// the rates of active flows routed over it; anything above capacity is
// dropped, proportionally across the flows sharing the link. Single writer.
class SimState {
 public:
  SimState(std::shared_ptr<const NetworkGraph> graph, std::uint64_t seed, SimParams params = {});

  const NetworkGraph& graph() const noexcept { return *graph_; }
  const std::shared_ptr<const NetworkGraph>& graph_ptr() const noexcept { return graph_; }
  const SimParams& params() const noexcept { return params_; }
  Tick clock() const noexcept { return clock_; }

  // Throws InvalidPath unless path is a simple src -> dst path of the graph.
  FlowId assign_flow(const FlowDemand& demand, const Path& path);
  void reroute_flow(FlowId id, const Path& path);
  void remove_flow(FlowId id);
  void clear_flows();
  const std::map<FlowId, FlowRuntime>& flows() const noexcept { return flows_; }

  void step(double delta_t_s = 1.0);

  const LinkRuntime& link(EdgeIndex e) const { return links_.at(e); }
  const std::vector<LinkRuntime>& links() const noexcept { return links_; }
  SimSnapshot snapshot() const;

  // Timestamps of the LLDP/echo measurement over an intra-domain link.
  // Throws NotIntraDomain for border links, UnknownLink when absent.
  IntraDelayProbe probe_intradomain_delay(NodeIndex a, NodeIndex b);
  // Timestamps of the detect_pkt exchange over a border link.
  InterDelayProbe probe_interdomain_delay(NodeIndex a, NodeIndex b);
  // Probe recovery for any link, choosing the method by link type.
  double probe_delay(EdgeIndex e);

 private:
  std::int64_t jitter_ns();
  void validate(const FlowDemand& demand, const Path& path) const;

  std::shared_ptr<const NetworkGraph> graph_;
  SimParams params_;
  std::vector<LinkRuntime> links_;
  std::map<FlowId, FlowRuntime> flows_;
  FlowId next_flow_ = 1;
  Tick clock_ = 0;
  double last_interval_s_ = 1.0;
  std::mt19937_64 rng_;
  std::mt19937_64 probe_rng_;
};

SimState init_sim(std::shared_ptr<const NetworkGraph> graph, std::uint64_t seed, SimParams params = {});

// Demand schedule file: JSON array of {src, dst, rate_mbit, start_tick, end_tick}.
std::vector<FlowDemand> load_demand_schedule(const NetworkGraph& graph, const std::string& json_text);
std::string serialize_demand_schedule(const NetworkGraph& graph, const std::vector<FlowDemand>& demands);

}  // namespace xdr
