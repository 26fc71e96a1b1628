#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xdr/linalg.hpp"
#include "xdr/netsim.hpp"
#include "xdr/topology.hpp"

namespace xdr {

inline constexpr double kMetricBwFloorMbit = 0.01;

// Transmitted volume over remaining bandwidth times the interval. Bytes are
// converted to Mbit first; the result is a dimensionless pressure ratio.
double link_throughput(std::uint64_t tx_bytes, double remaining_mbit, double interval_s,
                       double bw_floor_mbit = kMetricBwFloorMbit);

// (tx - rx) / tx, 0 for an idle link. Throws NegativeLoss when rx > tx.
double link_loss(std::uint64_t tx_pkts, std::uint64_t rx_pkts);

// Probe-recovered delay of the link between a and b: the LLDP/echo method
// inside a domain, the detect_pkt method on border links. Throws UnknownLink.
double link_delay(SimState& sim, NodeIndex a, NodeIndex b);

// Per-link metrics of one interval over every node of the graph. Entries of
// node pairs without a link are 0.
struct LinkMetricFrame {
  Tick tick_begin = 0;
  Tick tick_end = 0;
  double interval_s = 1.0;
  std::vector<NodeIndex> nodes;
  LinkMask links;
  Matrix throughput;
  Matrix delay_ms;
  Matrix loss;
};

// Frame of the interval the simulator just completed. Delays come from fresh
// probes.
LinkMetricFrame measure_frame(SimState& sim, double bw_floor_mbit = kMetricBwFloorMbit);

struct MetricTriple {
  double throughput = 0.0;
  double delay_ms = 0.0;
  double loss = 0.0;

  bool operator==(const MetricTriple&) const = default;
};

// Sum over all ordered pairs of the domain's nodes divided by |V_d|^2, then
// averaged over the window. Throws EmptyWindow.
MetricTriple domain_averages(const NetworkGraph& graph, const std::vector<LinkMetricFrame>& window, DomainId domain);
// Same over every node, denominator |V|^2.
MetricTriple global_averages(const std::vector<LinkMetricFrame>& window);

struct AveragedReport {
  std::string algorithm;
  double offered_load_mbit = 0.0;
  std::map<DomainId, MetricTriple> domains;
  MetricTriple global;
};

AveragedReport average_report(const NetworkGraph& graph, const std::vector<LinkMetricFrame>& window,
                              std::string algorithm, double offered_load_mbit);

// One row per (algorithm, scope, load), sorted by algorithm, then scope
// (global first, then domains ascending), then load.
std::string emit_report(const std::vector<AveragedReport>& reports);

struct ReportRow {
  std::string algorithm;
  std::string scope;
  double offered_load_mbit = 0.0;
  MetricTriple metrics;
};

// Parses a document written by emit_report. Throws MalformedConfig.
std::vector<ReportRow> parse_report(const std::string& csv);

}  // namespace xdr
