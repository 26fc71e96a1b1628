#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "xdr/error.hpp"
#include "xdr/experiment.hpp"

namespace fs = std::filesystem;
using namespace xdr;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGTERM, &sa, nullptr);
  sigaction(SIGINT, &sa, nullptr);
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out_dir = *g.out;
  if (const char* addr = std::getenv("XDR_ROOT_ADDR"); addr && *addr) cfg.root_addr = addr;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::Io, "cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path, Errc missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(missing, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path pool_path(const ExperimentConfig& cfg, Scope s) {
  return fs::path(cfg.out_dir) / "pools" / ("pool_" + scope_file_label(s) + ".json");
}

struct Setup {
  std::shared_ptr<const NetworkGraph> graph;
  std::shared_ptr<const AgentCandidates> cands;
};

Setup setup(const ExperimentConfig& cfg) {
  Setup s;
  s.graph = std::make_shared<const NetworkGraph>(make_graph(cfg));
  s.cands = std::make_shared<const AgentCandidates>(AgentCandidates::build(*s.graph, resolved_candidates(cfg, *s.graph)));
  return s;
}

std::vector<Scope> selected_scopes(const NetworkGraph& g, const std::string& which) {
  if (which == "all") return agent_scopes(g);
  const Scope s = Scope::parse(which);
  if (s.kind == Scope::Kind::Border) raise(Errc::ScopeMismatch, "no agent acts on the border scope");
  return {s};
}

ModelSet load_models(const NetworkGraph& g, const AgentCandidates& cands, const ExperimentConfig& cfg,
                     const std::string& dir) {
  ModelSet models;
  for (Scope s : agent_scopes(g)) models.emplace(s.label(), load_model(g, cands, cfg, s, ModelPaths::in(dir, s)));
  return models;
}

// ---------------------------------------------------------------- commands

int cmd_gen_topo(const Globals& globals, std::uint64_t seed, const std::vector<int>& sizes, double bw_min,
                 double bw_max, int cap_domain, double cap, const std::string& file) {
  ExperimentConfig cfg = globals.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(globals.config);
  if (globals.out) cfg.out_dir = *globals.out;
  std::optional<CappedDomain> capped;
  if (cap_domain > 0) capped = CappedDomain{cap_domain, cap};
  const NetworkGraph g = generate_experiment_topology(seed, sizes, {bw_min, bw_max}, capped);
  const fs::path path = file.empty() ? fs::path(cfg.out_dir) / "topology.json" : fs::path(file);
  write_file(path, serialize_topology(g));
  std::printf("wrote %s: %zu nodes, %zu links, %zu domains\n", path.c_str(), g.node_count(), g.edge_count(),
              g.domain_count());
  return 0;
}

int cmd_collect(const Globals& globals) {
  const ExperimentConfig cfg = load_config(globals);
  const Setup s = setup(cfg);
  const PoolSet pools = collect_pools(s.graph, *s.cands, cfg);
  for (Scope scope : agent_scopes(*s.graph)) {
    const auto& tms = pools.at(scope.label());
    write_pool(pool_path(cfg, scope).string(), *s.graph, scope, tms);
    std::printf("pool %-8s %zu matrices -> %s\n", scope.label().c_str(), tms.size(), pool_path(cfg, scope).c_str());
  }
  return 0;
}

int cmd_train(const Globals& globals, const std::string& which, bool no_prediction) {
  ExperimentConfig cfg = load_config(globals);
  if (no_prediction) cfg.use_prediction = false;
  const Setup s = setup(cfg);
  for (Scope scope : selected_scopes(*s.graph, which)) {
    const auto pool = read_pool(pool_path(cfg, scope).string(), *s.graph);
    const auto t0 = std::chrono::steady_clock::now();
    const ScopeTraining t = train_scope(s.graph, s.cands, cfg, scope, pool);
    save_training(t, ModelPaths::in(cfg.out_dir, scope));
    const auto [first, last] = decile_means(t.dqn.episode_rewards);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-8s reward first-decile %.4f last-decile %.4f", scope.label().c_str(), first, last);
    if (!t.gru_loss.empty()) std::printf(" gru loss %.6f -> %.6f", t.gru_loss.front(), t.gru_loss.back());
    std::printf(" (%.1fs)\n", secs);
  }
  return 0;
}

int cmd_serve_root(const Globals& globals, const std::string& listen, int pull_ms, bool routing, int tick_ms,
                   std::size_t ticks, const std::string& models_dir) {
  const ExperimentConfig cfg = load_config(globals);
  const Setup s = setup(cfg);
  const NetworkGraph& g = *s.graph;

  std::optional<DrlTpModel> model;
  if (routing) {
    model = load_model(g, *s.cands, cfg, Scope::global(),
                       ModelPaths::in(models_dir.empty() ? cfg.out_dir : models_dir, Scope::global()));
  }

  coop::RootOptions ro;
  ro.bind = coop::Endpoint::parse(listen.empty() ? cfg.root_addr : listen);
  ro.pull_interval_ms = pull_ms;
  coop::RootServer root(s.graph, ro);

  // The root measures border links on its replica of the network.
  std::mutex mutex;
  std::map<Tick, TrafficMatrix> border;
  std::size_t action = 0;
  root.set_border_source([&](Tick t) -> std::optional<TrafficMatrix> {
    std::lock_guard lock(mutex);
    const auto it = border.find(t);
    if (it == border.end()) return std::nullopt;
    return it->second;
  });
  root.set_path_oracle([&](NodeIndex a, NodeIndex b) -> std::optional<Path> {
    std::lock_guard lock(mutex);
    return s.cands->root.at(action).path(a, b);
  });
  install_signal_handlers();
  root.start();
  std::printf("root listening on %s:%u\n", ro.bind.host.c_str(), root.port());
  std::fflush(stdout);

  const TrafficProcess traffic(g, cfg.traffic, cfg.seed);
  const auto ep = traffic.episode(0);
  SimState sim(s.graph, cfg.seed, cfg.sim);
  std::vector<TrafficMatrix> window;
  Tick assembled = 0;
  for (std::size_t t = 0; !g_stop && (ticks == 0 || t < ticks); ++t) {
    sim.clear_flows();
    for (const FlowDemand& d : traffic.demands_at(ep, sim.clock())) {
      sim.assign_flow(d, compose_route(g, *s.cands, RoutingPlan{}, d.src, d.dst));
    }
    sim.step(1.0);
    {
      std::lock_guard lock(mutex);
      border[sim.clock()] = build_tm(collect_info(sim.snapshot(), Scope::border()), cfg.tm.weights, cfg.tm.params);
      while (border.size() > 256) border.erase(border.begin());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(tick_ms));
    const Tick ready = root.registry().complete_tick();
    for (Tick k = std::max<Tick>(assembled + 1, ready - static_cast<Tick>(cfg.seq) + 1); k <= ready; ++k) {
      if (const auto utm = root.assemble(k)) {
        window.push_back(normalize_tm(*utm, cfg.tm.mu1, cfg.tm.mu2));
        if (window.size() > cfg.seq) window.erase(window.begin());
        assembled = k;
      }
    }
    if (model && window.size() == cfg.seq) {
      const RouteChoice c = drl_tp_route(*model, window.back(), window);
      std::lock_guard lock(mutex);
      action = c.action;
    }
  }
  root.stop();
  std::printf("root stopped: %zu controllers, %llu matrices, %llu responses\n", root.registry().size(),
              static_cast<unsigned long long>(root.registry().tm_count()),
              static_cast<unsigned long long>(root.responses_sent()));
  return 0;
}

int cmd_serve_local(const Globals& globals, DomainId domain, const std::string& root_addr, int attempts, int tick_ms,
                    std::size_t ticks, bool requests) {
  ExperimentConfig cfg = load_config(globals);
  const Setup s = setup(cfg);
  const NetworkGraph& g = *s.graph;
  if (std::find(g.domain_ids().begin(), g.domain_ids().end(), domain) == g.domain_ids().end()) {
    raise(Errc::ScopeMismatch, "no domain " + std::to_string(domain));
  }
  coop::ClientOptions co;
  co.root = coop::Endpoint::parse(root_addr.empty() ? cfg.root_addr : root_addr);
  co.connect_attempts = attempts;
  coop::LocalClient client(s.graph, domain, "local-" + std::to_string(domain), co);
  install_signal_handlers();
  client.connect();
  const auto t0 = std::chrono::steady_clock::now();
  client.local_register();
  const double reg_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::printf("local %d registered with %s in %.1f ms\n", domain, co.root.str().c_str(), reg_ms);
  std::fflush(stdout);

  const TrafficProcess traffic(g, cfg.traffic, cfg.seed);
  const auto ep = traffic.episode(0);
  SimState sim(s.graph, cfg.seed, cfg.sim);
  std::size_t answered = 0;
  for (std::size_t t = 0; !g_stop && (ticks == 0 || t < ticks); ++t) {
    sim.clear_flows();
    const auto demands = traffic.demands_at(ep, sim.clock());
    for (const FlowDemand& d : demands) sim.assign_flow(d, compose_route(g, *s.cands, RoutingPlan{}, d.src, d.dst));
    sim.step(1.0);
    client.syn_global_view(
        {build_tm(collect_info(sim.snapshot(), Scope::of_domain(domain)), cfg.tm.weights, cfg.tm.params)});
    if (requests) {
      for (const FlowDemand& d : demands) {
        if (g.domain_of(d.src) == domain && g.domain_of(d.dst) != domain) {
          (void)client.request_inter_path(d.src, d.dst);
          ++answered;
        }
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(tick_ms));
  }
  client.flush();
  client.close();
  std::printf("local %d stopped: %llu batches sent, %zu inter paths received\n", domain,
              static_cast<unsigned long long>(client.frames_sent(coop::StatusCode::SynGlobalView)), answered);
  return 0;
}

int cmd_evaluate(const Globals& globals, const std::string& algorithms, const std::string& models_dir,
                 const std::string& csv_path) {
  const ExperimentConfig cfg = load_config(globals);
  const Setup s = setup(cfg);
  std::vector<Algorithm> algs;
  std::stringstream ss(algorithms);
  for (std::string a; std::getline(ss, a, ',');) {
    if (!a.empty()) algs.push_back(parse_algorithm(a));
  }
  if (algs.empty()) raise(Errc::MalformedConfig, "no algorithms selected");
  std::optional<ModelSet> models;
  if (std::find(algs.begin(), algs.end(), Algorithm::MdrlTp) != algs.end()) {
    models = load_models(*s.graph, *s.cands, cfg, models_dir.empty() ? cfg.out_dir : models_dir);
  }
  EvalTrace trace;
  const auto reports = evaluate(s.graph, s.cands, cfg, algs, models ? &*models : nullptr, &trace);
  const fs::path out = csv_path.empty() ? fs::path(cfg.out_dir) / "metrics.csv" : fs::path(csv_path);
  write_file(out, emit_report(reports));
  std::printf("wrote %s (%zu reports)\n", out.c_str(), reports.size());
  for (const auto& [scope, hist] : trace.actions) {
    std::printf("  %-8s actions:", scope.c_str());
    for (const auto& [a, n] : hist) std::printf(" %zu:%zu", a, n);
    std::printf("\n");
  }
  return 0;
}

int cmd_report(const Globals& globals, const std::string& csv_path, const std::string& baseline) {
  ExperimentConfig cfg = globals.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(globals.config);
  if (globals.out) cfg.out_dir = *globals.out;
  const fs::path in = csv_path.empty() ? fs::path(cfg.out_dir) / "metrics.csv" : fs::path(csv_path);
  const auto rows = parse_report(read_file(in, Errc::Io));

  std::map<std::pair<std::string, double>, std::map<std::string, MetricTriple>> global;
  std::set<std::string> algs;
  for (const ReportRow& r : rows) {
    if (r.scope != "global") continue;
    global[{r.scope, r.offered_load_mbit}][r.algorithm] = r.metrics;
    algs.insert(r.algorithm);
  }
  std::ostringstream md;
  md << "| load | algorithm | throughput | delay_ms | loss |";
  if (algs.count(baseline)) md << " vs " << baseline << " |";
  md << "\n|---|---|---|---|---|" << (algs.count(baseline) ? "---|" : "") << "\n";
  char buf[256];
  for (const auto& [key, by_alg] : global) {
    for (const auto& [alg, m] : by_alg) {
      std::snprintf(buf, sizeof buf, "| %g | %s | %.6g | %.6g | %.6g |", key.second, alg.c_str(), m.throughput,
                    m.delay_ms, m.loss);
      md << buf;
      if (algs.count(baseline)) {
        const auto b = by_alg.find(baseline);
        if (b == by_alg.end() || alg == baseline) {
          md << " - |";
        } else {
          const bool better = m.throughput >= b->second.throughput && m.loss <= b->second.loss;
          md << (better ? " not worse |" : " worse |");
        }
      }
      md << "\n";
    }
  }
  std::cout << md.str();
  write_file(in.parent_path() / "report.md", md.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xdr: multi-domain SDN routing toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--seed", g.seed, "master seed override");
  app.add_option("--out", g.out, "output directory override");

  auto* gen = app.add_subcommand("gen-topo", "generate the experiment topology");
  std::uint64_t topo_seed = 7;
  std::vector<int> sizes{13, 13, 13};
  double bw_min = 1.0, bw_max = 10.0, cap = 5.0;
  int cap_domain = 1;
  std::string topo_file;
  gen->add_option("--topo-seed", topo_seed, "generator seed");
  gen->add_option("--sizes", sizes, "switches per domain")->delimiter(',');
  gen->add_option("--bw-min", bw_min, "minimum link capacity (Mbit/s)");
  gen->add_option("--bw-max", bw_max, "maximum link capacity (Mbit/s)");
  gen->add_option("--cap-domain", cap_domain, "domain whose links are capped (0 for none)");
  gen->add_option("--cap", cap, "capacity cap (Mbit/s)");
  gen->add_option("--file", topo_file, "output file (default <out>/topology.json)");

  auto* collect = app.add_subcommand("collect", "simulate and dump matrix pools");

  auto* train = app.add_subcommand("train", "train GRU predictors and DQN agents");
  std::string which = "all";
  bool no_prediction = false;
  train->add_option("--scope", which, "all, global or domainN");
  train->add_flag("--no-prediction", no_prediction, "train without the GRU-predicted state");

  auto* root = app.add_subcommand("serve-root", "run the root controller");
  std::string listen, models_dir;
  int pull_ms = 0, tick_ms = 200;
  std::size_t ticks = 0;
  bool no_routing = false;
  root->add_option("--listen", listen, "host:port (default root_addr)");
  root->add_option("--pull-ms", pull_ms, "active pull period, 0 disables");
  root->add_flag("--no-routing", no_routing, "serve candidate 0 without loading checkpoints");
  root->add_option("--models", models_dir, "checkpoint directory (default <out>)");
  root->add_option("--tick-ms", tick_ms, "wall time per interval");
  root->add_option("--ticks", ticks, "stop after this many intervals, 0 runs until signalled");

  auto* local = app.add_subcommand("serve-local", "run one local controller");
  DomainId domain = 1;
  std::string root_addr;
  int attempts = 5;
  bool requests = false;
  local->add_option("--domain", domain, "domain id")->required();
  local->add_option("--root", root_addr, "root host:port (default root_addr)");
  local->add_option("--connect-attempts", attempts, "connection attempts before giving up");
  local->add_option("--tick-ms", tick_ms, "wall time per interval");
  local->add_option("--ticks", ticks, "stop after this many intervals, 0 runs until signalled");
  local->add_flag("--requests", requests, "ask the root for inter paths of outgoing flows");

  auto* eval = app.add_subcommand("evaluate", "compare routing algorithms over the load sweep");
  std::string algorithms = "mdrl-tp,dijkstra,ospf", csv_path;
  eval->add_option("--algorithms", algorithms, "comma list of mdrl-tp, dijkstra, ospf");
  eval->add_option("--models", models_dir, "checkpoint directory (default <out>)");
  eval->add_option("--csv", csv_path, "metrics output (default <out>/metrics.csv)");

  auto* report = app.add_subcommand("report", "summarize a metrics CSV");
  std::string baseline = "dijkstra";
  report->add_option("--csv", csv_path, "metrics input (default <out>/metrics.csv)");
  report->add_option("--baseline", baseline, "algorithm the others are compared to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen_topo(g, topo_seed, sizes, bw_min, bw_max, cap_domain, cap, topo_file);
    if (*collect) return cmd_collect(g);
    if (*train) return cmd_train(g, which, no_prediction);
    if (*root) return cmd_serve_root(g, listen, pull_ms, !no_routing, tick_ms, ticks, models_dir);
    if (*local) return cmd_serve_local(g, domain, root_addr, attempts, tick_ms, ticks, requests);
    if (*eval) return cmd_evaluate(g, algorithms, models_dir, csv_path);
    if (*report) return cmd_report(g, csv_path, baseline);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(errc_name(e.code())).c_str(), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
