#include "xdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "xdr/error.hpp"

namespace xdr {

double link_throughput(std::uint64_t tx_bytes, double remaining_mbit, double interval_s, double bw_floor_mbit) {
  if (!(interval_s > 0.0)) raise(Errc::InvalidRange, "interval must be positive");
  if (tx_bytes == 0) return 0.0;
  const double mbit = static_cast<double>(tx_bytes) * 8.0 / 1e6;
  return mbit / (std::max(remaining_mbit, bw_floor_mbit) * interval_s);
}

double link_loss(std::uint64_t tx_pkts, std::uint64_t rx_pkts) {
  if (rx_pkts > tx_pkts) raise(Errc::NegativeLoss, "link received more packets than were sent");
  if (tx_pkts == 0) return 0.0;
  return static_cast<double>(tx_pkts - rx_pkts) / static_cast<double>(tx_pkts);
}

double link_delay(SimState& sim, NodeIndex a, NodeIndex b) {
  const NetworkGraph& g = sim.graph();
  if (a >= g.node_count() || b >= g.node_count()) raise(Errc::UnknownLink, "switch index out of range");
  const auto e = g.edge_between(a, b);
  if (!e) raise(Errc::UnknownLink, "no link between " + g.node_id(a) + " and " + g.node_id(b));
  return sim.probe_delay(*e);
}

LinkMetricFrame measure_frame(SimState& sim, double bw_floor_mbit) {
  const NetworkGraph& g = sim.graph();
  const SimSnapshot snap = sim.snapshot();
  const auto n = static_cast<Eigen::Index>(g.node_count());
  LinkMetricFrame f;
  f.tick_end = snap.tick;
  f.tick_begin = snap.tick - 1;
  f.interval_s = snap.interval_s;
  f.nodes.resize(g.node_count());
  for (std::size_t i = 0; i < f.nodes.size(); ++i) f.nodes[i] = static_cast<NodeIndex>(i);
  f.links = LinkMask::Constant(n, n, false);
  f.throughput = Matrix::Zero(n, n);
  f.delay_ms = Matrix::Zero(n, n);
  f.loss = Matrix::Zero(n, n);
  for (EdgeIndex ei = 0; ei < g.edge_count(); ++ei) {
    const Edge& e = g.edge(ei);
    const LinkRuntime& rt = snap.links[ei];
    const double thr = link_throughput(rt.tx_bytes, e.attr.capacity_mbit - rt.used_bw_mbit, snap.interval_s,
                                       bw_floor_mbit);
    const double loss = link_loss(rt.tx_pkts, rt.rx_pkts);
    const double delay = sim.probe_delay(ei);
    for (const auto& [a, b] : {std::pair{e.u, e.v}, std::pair{e.v, e.u}}) {
      f.links(a, b) = true;
      f.throughput(a, b) = thr;
      f.loss(a, b) = loss;
      f.delay_ms(a, b) = delay;
    }
  }
  return f;
}

namespace {

MetricTriple window_mean(const std::vector<LinkMetricFrame>& window, const std::vector<Eigen::Index>& rows) {
  if (window.empty()) raise(Errc::EmptyWindow, "averaging window is empty");
  if (rows.empty()) raise(Errc::EmptyDomain, "no nodes to average over");
  const double pairs = static_cast<double>(rows.size() * rows.size());
  MetricTriple sum;
  for (const LinkMetricFrame& f : window) {
    double thr = 0.0, delay = 0.0, loss = 0.0;
    for (Eigen::Index i : rows) {
      for (Eigen::Index j : rows) {
        thr += f.throughput(i, j);
        delay += f.delay_ms(i, j);
        loss += f.loss(i, j);
      }
    }
    sum.throughput += thr / pairs;
    sum.delay_ms += delay / pairs;
    sum.loss += loss / pairs;
  }
  const auto frames = static_cast<double>(window.size());
  return {sum.throughput / frames, sum.delay_ms / frames, sum.loss / frames};
}

}  // namespace

MetricTriple domain_averages(const NetworkGraph& graph, const std::vector<LinkMetricFrame>& window, DomainId domain) {
  if (window.empty()) raise(Errc::EmptyWindow, "averaging window is empty");
  std::vector<Eigen::Index> rows;
  for (NodeIndex n : graph.domain_nodes(domain)) rows.push_back(static_cast<Eigen::Index>(n));
  return window_mean(window, rows);
}

MetricTriple global_averages(const std::vector<LinkMetricFrame>& window) {
  if (window.empty()) raise(Errc::EmptyWindow, "averaging window is empty");
  std::vector<Eigen::Index> rows(window.front().nodes.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
  return window_mean(window, rows);
}

AveragedReport average_report(const NetworkGraph& graph, const std::vector<LinkMetricFrame>& window,
                              std::string algorithm, double offered_load_mbit) {
  AveragedReport r;
  r.algorithm = std::move(algorithm);
  r.offered_load_mbit = offered_load_mbit;
  r.global = global_averages(window);
  for (DomainId d : graph.domain_ids()) r.domains.emplace(d, domain_averages(graph, window, d));
  return r;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr const char* kHeader = "algorithm,scope,offered_load_mbit,avg_throughput,avg_delay_ms,avg_loss";

}  // namespace

std::string emit_report(const std::vector<AveragedReport>& reports) {
  if (reports.empty()) raise(Errc::EmptyWindow, "no reports to emit");
  struct Row {
    std::string algorithm;
    int scope_rank;  // 0 = global, then domain id + 1
    std::string scope;
    double load;
    MetricTriple m;
  };
  std::vector<Row> rows;
  for (const AveragedReport& r : reports) {
    for (const double v : {r.global.throughput, r.global.delay_ms, r.global.loss}) {
      if (!std::isfinite(v)) raise(Errc::InvalidRange, "report holds a non-finite value");
    }
    rows.push_back({r.algorithm, 0, "global", r.offered_load_mbit, r.global});
    for (const auto& [d, m] : r.domains) {
      rows.push_back({r.algorithm, d + 1, Scope::of_domain(d).label(), r.offered_load_mbit, m});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.algorithm, a.scope_rank, a.load) < std::tie(b.algorithm, b.scope_rank, b.load);
  });
  std::string out = std::string(kHeader) + "\n";
  for (const Row& r : rows) {
    out += r.algorithm + "," + r.scope + "," + fmt6(r.load) + "," + fmt6(r.m.throughput) + "," +
           fmt6(r.m.delay_ms) + "," + fmt6(r.m.loss) + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_report(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) raise(Errc::MalformedConfig, "report header mismatch");
  std::vector<ReportRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) raise(Errc::MalformedConfig, "report row needs 6 columns: " + line);
    try {
      out.push_back({cells[0], cells[1], std::stod(cells[2]), {std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5])}});
    } catch (const std::logic_error&) {
      raise(Errc::MalformedConfig, "bad number in report row: " + line);
    }
  }
  return out;
}

}  // namespace xdr
