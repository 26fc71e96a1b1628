#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <random>

#include <nlohmann/json.hpp>

#include "xdr/agents.hpp"
#include "xdr/coopcomm.hpp"
#include "xdr/error.hpp"
#include "xdr/experiment.hpp"
#include "xdr/metrics.hpp"
#include "xdr/routing.hpp"

namespace py = pybind11;
using namespace xdr;

namespace {

using GraphPtr = std::shared_ptr<NetworkGraph>;

NodeIndex node(const NetworkGraph& g, const std::string& id) { return g.index_of(id); }

std::vector<std::string> ids(const NetworkGraph& g, const Path& p) {
  std::vector<std::string> out;
  for (NodeIndex n : p) out.push_back(g.node_id(n));
  return out;
}

Path path_of(const NetworkGraph& g, const std::vector<std::string>& p) {
  Path out;
  for (const auto& id : p) out.push_back(g.index_of(id));
  return out;
}

// Simulator handle that keeps its graph alive.
class PySim {
 public:
  PySim(GraphPtr g, std::uint64_t seed) : graph_(std::move(g)), sim_(graph_, seed) {}

  std::uint64_t assign_flow(const std::string& src, const std::string& dst, double rate,
                            const std::vector<std::string>& path) {
    return sim_.assign_flow({node(*graph_, src), node(*graph_, dst), rate}, path_of(*graph_, path));
  }
  void clear_flows() { sim_.clear_flows(); }
  void step(double dt) { sim_.step(dt); }
  Tick clock() const { return sim_.clock(); }

  py::list link_stats() const {
    py::list out;
    for (EdgeIndex e = 0; e < graph_->edge_count(); ++e) {
      const Edge& edge = graph_->edge(e);
      const LinkRuntime& rt = sim_.link(e);
      py::dict d;
      d["u"] = graph_->node_id(edge.u);
      d["v"] = graph_->node_id(edge.v);
      d["capacity_mbit"] = edge.attr.capacity_mbit;
      d["offered_mbit"] = rt.offered_mbit;
      d["used_bw_mbit"] = rt.used_bw_mbit;
      d["tx_pkts"] = rt.tx_pkts;
      d["rx_pkts"] = rt.rx_pkts;
      d["drops"] = rt.drops;
      d["errors"] = rt.errors;
      d["tx_bytes"] = rt.tx_bytes;
      d["measured_delay_ms"] = rt.measured_delay_ms;
      out.append(d);
    }
    return out;
  }

  // Normalized TM of a scope ("global", "border", "domainN").
  Matrix traffic_matrix(const std::string& scope, double mu1, double mu2) const {
    const TrafficMatrix tm =
        normalize_tm(build_tm(collect_info(sim_.snapshot(), Scope::parse(scope)), TmWeights::defaults()), mu1, mu2);
    const auto n = static_cast<Eigen::Index>(tm.size());
    return Eigen::Map<const Matrix>(tm.flatten().data(), n, n);
  }

  double probe_delay(const std::string& a, const std::string& b) {
    const auto e = graph_->edge_between(node(*graph_, a), node(*graph_, b));
    if (!e) raise(Errc::UnknownLink, "no link between " + a + " and " + b);
    return sim_.probe_delay(*e);
  }

 private:
  GraphPtr graph_;
  SimState sim_;
};

}  // namespace

PYBIND11_MODULE(_xdroute, m) {
  m.doc() = "Multi-domain SDN routing core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "XdrError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type.get_stored(), e.what());
    }
  });

  py::class_<NetworkGraph, GraphPtr>(m, "Graph")
      .def_static(
          "generate",
          [](std::uint64_t seed, std::vector<int> sizes, double bw_min, double bw_max, int cap_domain, double cap) {
            std::optional<CappedDomain> capped;
            if (cap_domain > 0) capped = CappedDomain{cap_domain, cap};
            return std::make_shared<NetworkGraph>(
                generate_experiment_topology(seed, sizes, {bw_min, bw_max}, capped));
          },
          py::arg("seed") = 7, py::arg("sizes") = std::vector<int>{13, 13, 13}, py::arg("bw_min") = 1.0,
          py::arg("bw_max") = 10.0, py::arg("cap_domain") = 1, py::arg("cap") = 5.0)
      .def_static("from_json",
                  [](const std::string& text) { return std::make_shared<NetworkGraph>(load_topology(text)); })
      .def("to_json", [](const NetworkGraph& g) { return serialize_topology(g); })
      .def_property_readonly("node_count", &NetworkGraph::node_count)
      .def_property_readonly("edge_count", &NetworkGraph::edge_count)
      .def_property_readonly("nodes", &NetworkGraph::nodes)
      .def_property_readonly("domain_ids", &NetworkGraph::domain_ids)
      .def("domain_of", [](const NetworkGraph& g, const std::string& id) { return g.domain_of(g.index_of(id)); })
      .def("edges", [](const NetworkGraph& g) {
        std::vector<std::tuple<std::string, std::string, double, double>> out;
        for (const Edge& e : g.edges()) {
          out.emplace_back(g.node_id(e.u), g.node_id(e.v), e.attr.capacity_mbit, e.attr.base_delay_ms);
        }
        return out;
      });

  m.def("shortest_path",
        [](const NetworkGraph& g, const std::string& src, const std::string& dst) {
          return ids(g, shortest_path(g, node(g, src), node(g, dst), hop_weights(g)));
        },
        "Lexicographically smallest minimum-hop path");
  m.def("k_shortest_paths",
        [](const NetworkGraph& g, const std::string& src, const std::string& dst, std::size_t k) {
          std::vector<std::vector<std::string>> out;
          for (const Path& p : yen_k_shortest(g, node(g, src), node(g, dst), k, hop_weights(g))) {
            out.push_back(ids(g, p));
          }
          return out;
        },
        py::arg("graph"), py::arg("src"), py::arg("dst"), py::arg("k"));
  m.def("candidate_count", &candidate_count);

  py::class_<PySim>(m, "Simulator")
      .def(py::init<GraphPtr, std::uint64_t>(), py::arg("graph"), py::arg("seed") = 1)
      .def("assign_flow", &PySim::assign_flow, py::arg("src"), py::arg("dst"), py::arg("rate_mbit"), py::arg("path"))
      .def("clear_flows", &PySim::clear_flows)
      .def("step", &PySim::step, py::arg("dt") = 1.0)
      .def_property_readonly("clock", &PySim::clock)
      .def("link_stats", &PySim::link_stats)
      .def("traffic_matrix", &PySim::traffic_matrix, py::arg("scope") = "global", py::arg("mu1") = 0.0,
           py::arg("mu2") = 1.0)
      .def("probe_delay", &PySim::probe_delay);

  m.def(
      "normalize",
      [](const Matrix& values, double mu1, double mu2) {
        TrafficMatrix tm;
        tm.scope = Scope::global();
        tm.values = values;
        tm.links = LinkMask::Constant(values.rows(), values.cols(), true);
        tm.nodes.resize(static_cast<std::size_t>(values.rows()));
        return normalize_tm(tm, mu1, mu2).values;
      },
      py::arg("values"), py::arg("mu1") = 0.0, py::arg("mu2") = 1.0, "Min-Max rescaling of every entry");

  m.def(
      "epsilon",
      [](std::uint64_t steps, double e_max, double e_min, std::uint64_t total) {
        EpsilonSchedule s;
        s.e_max = e_max;
        s.e_min = e_min;
        s.total_steps = total;
        s.validate();
        return s.at(steps);
      },
      py::arg("steps"), py::arg("e_max") = 0.95, py::arg("e_min") = 0.05, py::arg("total_steps") = 10000);

  m.def("link_throughput", &link_throughput, py::arg("tx_bytes"), py::arg("remaining_mbit"), py::arg("interval_s"),
        py::arg("bw_floor_mbit") = kMetricBwFloorMbit);
  m.def("link_loss", &link_loss, py::arg("tx_pkts"), py::arg("rx_pkts"));

  m.def(
      "encode_message",
      [](const std::string& code, const std::string& name, std::uint64_t rid, const std::string& body) {
        coop::Message msg{coop::parse_code(code), name, rid, nlohmann::json::parse(body)};
        const auto bytes = coop::encode_message(msg);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("code"), py::arg("name"), py::arg("rid"), py::arg("body") = "{}");
  m.def("decode_message", [](const py::bytes& data) {
    const std::string raw = data;
    const coop::Message msg = coop::decode_message(
        std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
    py::dict d;
    d["code"] = coop::code_string(msg.code);
    d["name"] = msg.name;
    d["rid"] = msg.rid;
    d["body"] = msg.body.dump();
    return d;
  });

  m.def("default_config", [] { return ExperimentConfig{}.to_json().dump(2); });
  m.def(
      "evaluate_baselines",
      [](const std::string& config_json, const std::vector<std::string>& algorithms) {
        const ExperimentConfig cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_json));
        cfg.validate();
        auto graph = std::make_shared<const NetworkGraph>(make_graph(cfg));
        auto cands =
            std::make_shared<const AgentCandidates>(AgentCandidates::build(*graph, resolved_candidates(cfg, *graph)));
        std::vector<Algorithm> algs;
        for (const auto& a : algorithms) {
          algs.push_back(parse_algorithm(a));
          if (algs.back() == Algorithm::MdrlTp) raise(Errc::MissingCheckpoint, "mdrl-tp needs the CLI pipeline");
        }
        return emit_report(evaluate(graph, cands, cfg, algs, nullptr));
      },
      py::arg("config_json"), py::arg("algorithms") = std::vector<std::string>{"dijkstra", "ospf"},
      "Metrics CSV of the checkpoint-free algorithms");
}
