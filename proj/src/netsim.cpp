#include "xdr/netsim.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "xdr/error.hpp"

namespace xdr {

namespace {

std::int64_t ms_to_ns(double ms) { return std::llround(ms * 1e6); }

// Rounds a delay to the simulator clock resolution of 1 ns.
double to_clock(double ms) { return static_cast<double>(ms_to_ns(ms)) / 1e6; }

}  // namespace

SimState::SimState(std::shared_ptr<const NetworkGraph> graph, std::uint64_t seed, SimParams params)
    : graph_(std::move(graph)), params_(params), rng_(seed), probe_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  links_.resize(graph_->edge_count());
  for (EdgeIndex e = 0; e < links_.size(); ++e) {
    links_[e].measured_delay_ms = to_clock(graph_->edge(e).attr.base_delay_ms);
  }
}

SimState init_sim(std::shared_ptr<const NetworkGraph> graph, std::uint64_t seed, SimParams params) {
  return SimState(std::move(graph), seed, params);
}

void SimState::validate(const FlowDemand& demand, const Path& path) const {
  if (demand.src == demand.dst) raise(Errc::InvalidPath, "flow source equals destination");
  if (!(demand.rate_mbit > 0.0)) raise(Errc::InvalidRange, "flow rate must be positive");
  if (!is_simple_path(*graph_, path, demand.src, demand.dst)) {
    raise(Errc::InvalidPath, "not a simple " + graph_->node_id(demand.src) + "->" + graph_->node_id(demand.dst) +
                                 " path: [" + format_path(*graph_, path) + "]");
  }
}

FlowId SimState::assign_flow(const FlowDemand& demand, const Path& path) {
  validate(demand, path);
  const FlowId id = next_flow_++;
  flows_.emplace(id, FlowRuntime{demand, path, path_edges(*graph_, path), 0.0});
  return id;
}

void SimState::reroute_flow(FlowId id, const Path& path) {
  auto& flow = flows_.at(id);
  validate(flow.demand, path);
  flow.path = path;
  flow.edges = path_edges(*graph_, path);
}

void SimState::remove_flow(FlowId id) { flows_.erase(id); }

void SimState::clear_flows() { flows_.clear(); }

void SimState::step(double delta_t_s) {
  if (!(delta_t_s > 0.0)) raise(Errc::InvalidRange, "step interval must be positive");
  const auto& edges = graph_->edges();

  std::vector<double> offered(edges.size(), 0.0);
  for (const auto& [id, flow] : flows_) {
    if (!flow.demand.active_at(clock_)) continue;
    for (EdgeIndex e : flow.edges) offered[e] += flow.demand.rate_mbit;
  }

  const double bits_per_packet = 8.0 * params_.packet_bytes;
  for (EdgeIndex e = 0; e < edges.size(); ++e) {
    const auto& attr = edges[e].attr;
    auto& rt = links_[e];
    const double load = offered[e];
    const double carried = std::min(load, attr.capacity_mbit);
    const double bits = load * 1e6 * delta_t_s;
    rt.offered_mbit = load;
    rt.used_bw_mbit = carried;
    rt.tx_bytes = static_cast<std::uint64_t>(std::llround(bits / 8.0));
    rt.rx_bytes = static_cast<std::uint64_t>(std::llround(carried * 1e6 * delta_t_s / 8.0));
    rt.tx_pkts = static_cast<std::uint64_t>(std::llround(bits / bits_per_packet));
    rt.drops = 0;
    if (load > attr.capacity_mbit && rt.tx_pkts > 0) {
      const double excess = (load - attr.capacity_mbit) / load;
      rt.drops = std::min(rt.tx_pkts, static_cast<std::uint64_t>(std::llround(rt.tx_pkts * excess)));
    }
    rt.rx_pkts = rt.tx_pkts - rt.drops;
    rt.errors = 0;
    if (params_.error_probability > 0.0 && rt.rx_pkts > 0) {
      std::binomial_distribution<std::uint64_t> errs(rt.rx_pkts, params_.error_probability);
      rt.errors = errs(rng_);
    }
    const double u = std::min(load / attr.capacity_mbit, params_.max_utilization);
    rt.measured_delay_ms = to_clock(attr.base_delay_ms * (1.0 + params_.queue_factor * u / (1.0 - u)));
  }

  for (auto& [id, flow] : flows_) {
    if (!flow.demand.active_at(clock_)) {
      flow.delivered_mbit = 0.0;
      continue;
    }
    double fraction = 1.0;
    for (EdgeIndex e : flow.edges) {
      const double load = offered[e];
      const double cap = edges[e].attr.capacity_mbit;
      if (load > cap) fraction *= cap / load;
    }
    flow.delivered_mbit = flow.demand.rate_mbit * fraction;
  }

  last_interval_s_ = delta_t_s;
  ++clock_;
}

SimSnapshot SimState::snapshot() const { return SimSnapshot{graph_, clock_, last_interval_s_, links_}; }

std::int64_t SimState::jitter_ns() {
  if (params_.probe_jitter_ms <= 0.0) return 0;
  std::uniform_real_distribution<double> dist(-params_.probe_jitter_ms, params_.probe_jitter_ms);
  return ms_to_ns(dist(probe_rng_));
}

IntraDelayProbe SimState::probe_intradomain_delay(NodeIndex a, NodeIndex b) {
  const auto e = graph_->edge_between(a, b);
  if (!e) raise(Errc::UnknownLink, "no link between probed switches");
  if (graph_->edge(*e).attr.domain_edge) raise(Errc::NotIntraDomain, "link crosses a domain border");
  const std::int64_t d = ms_to_ns(links_[*e].measured_delay_ms);
  const std::int64_t ta = ms_to_ns(params_.echo_rtt_ms);
  const std::int64_t tb = ta;
  // LLDP leaves the controller towards one switch, crosses the link and
  // returns from the other switch: half of each echo round trip plus d.
  IntraDelayProbe p{};
  p.ta_ns = ta;
  p.tb_ns = tb;
  p.t1_ns = ta / 2 + d + (tb - tb / 2) + jitter_ns();
  p.t2_ns = tb / 2 + d + (ta - ta / 2) + jitter_ns();
  return p;
}

InterDelayProbe SimState::probe_interdomain_delay(NodeIndex a, NodeIndex b) {
  const auto e = graph_->edge_between(a, b);
  if (!e) raise(Errc::UnknownLink, "no link between probed switches");
  if (!graph_->edge(*e).attr.domain_edge) raise(Errc::NotInterDomain, "link is inside one domain");
  const std::int64_t d = ms_to_ns(links_[*e].measured_delay_ms);
  InterDelayProbe p{};
  p.t_inter1_ns = d + jitter_ns();
  p.t_inter2_ns = d + jitter_ns();
  return p;
}

double SimState::probe_delay(EdgeIndex e) {
  const auto& edge = graph_->edge(e);
  if (edge.attr.domain_edge) return probe_interdomain_delay(edge.u, edge.v).recovered_delay_ms();
  return probe_intradomain_delay(edge.u, edge.v).recovered_delay_ms();
}

std::vector<FlowDemand> load_demand_schedule(const NetworkGraph& graph, const std::string& json_text) {
  std::vector<FlowDemand> out;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    if (!doc.is_array()) raise(Errc::MalformedConfig, "demand schedule must be a JSON array");
    for (const auto& item : doc) {
      FlowDemand d;
      d.src = graph.index_of(item.at("src").get<std::string>());
      d.dst = graph.index_of(item.at("dst").get<std::string>());
      d.rate_mbit = item.at("rate_mbit").get<double>();
      d.start_tick = item.at("start_tick").get<Tick>();
      d.end_tick = item.at("end_tick").get<Tick>();
      if (d.src == d.dst) raise(Errc::MalformedConfig, "demand with src == dst");
      if (!(d.rate_mbit > 0.0)) raise(Errc::MalformedConfig, "demand rate must be positive");
      if (d.end_tick < d.start_tick) raise(Errc::MalformedConfig, "demand ends before it starts");
      out.push_back(d);
    }
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::MalformedConfig, ex.what());
  }
  return out;
}

std::string serialize_demand_schedule(const NetworkGraph& graph, const std::vector<FlowDemand>& demands) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& d : demands) {
    doc.push_back({{"src", graph.node_id(d.src)},
                   {"dst", graph.node_id(d.dst)},
                   {"rate_mbit", d.rate_mbit},
                   {"start_tick", d.start_tick},
                   {"end_tick", d.end_tick}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace xdr
