#include "xdr/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>

#include "xdr/error.hpp"

namespace xdr {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

template <typename T>
void read_into(const Json& j, const char* key, T& out) {
  if (j.is_object() && j.contains(key) && !j[key].is_null()) {
    try {
      out = j[key].get<T>();
    } catch (const Json::exception& e) {
      raise(Errc::MalformedConfig, std::string("config key '") + key + "': " + e.what());
    }
  }
}

const Json& section(const Json& doc, const char* key) {
  static const Json empty = Json::object();
  if (!doc.contains(key)) return empty;
  if (!doc[key].is_object()) raise(Errc::MalformedConfig, std::string("config section '") + key + "' must be an object");
  return doc[key];
}

std::string read_text(const std::string& path, Errc missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(missing, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::Io, "cannot write " + path);
  out << text;
  if (!out) raise(Errc::Io, "write failed for " + path);
}

std::size_t scope_ordinal(const NetworkGraph& graph, Scope scope) {
  const auto scopes = agent_scopes(graph);
  for (std::size_t i = 0; i < scopes.size(); ++i) {
    if (scopes[i] == scope) return i;
  }
  raise(Errc::ScopeMismatch, "no agent for scope " + scope.label());
}

}  // namespace

// ----------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  traffic.validate();
  tm.weights.validate();
  reward.validate();
  DqnHyper h = dqn;
  if (h.sched.total_steps == 0) h.sched.total_steps = 1;
  h.validate();
  if (!(tm.mu1 < tm.mu2)) raise(Errc::InvalidRange, "mu1 must be below mu2");
  if (seq == 0 || horizon == 0) raise(Errc::InvalidRange, "seq and horizon must be positive");
  if (collect_ticks <= seq) raise(Errc::InvalidRange, "collect_ticks must exceed seq");
  if (!(explore_fraction > 0.0 && explore_fraction <= 1.0)) raise(Errc::InvalidRange, "explore_fraction in (0, 1]");
  if (gru.epochs == 0 || gru.batch == 0 || gru.hidden == 0 || gru.layers == 0 || !(gru.lr > 0.0)) {
    raise(Errc::InvalidRange, "gru hyperparameters must be positive");
  }
  if (eval.seeds.empty()) raise(Errc::MalformedConfig, "eval.seeds must not be empty");
  if (eval.window_ticks == 0) raise(Errc::InvalidRange, "eval.window_ticks must be positive");
  if (eval.warmup_ticks < seq) raise(Errc::InvalidRange, "eval.warmup_ticks must cover one prediction window");
  for (std::size_t i = 0; i < eval.loads.size(); ++i) {
    if (!(eval.loads[i] > 0.0)) raise(Errc::InvalidRange, "eval loads must be positive");
    if (i > 0 && !(eval.loads[i] > eval.loads[i - 1])) raise(Errc::MalformedConfig, "eval loads must ascend");
  }
  (void)coop::Endpoint::parse(root_addr);
}

Json ExperimentConfig::to_json() const {
  Json capped = nullptr;
  if (topology.capped) capped = {{"domain", topology.capped->domain}, {"cap_mbit", topology.capped->cap_mbit}};
  return {
      {"topology",
       {{"file", topology.file},
        {"seed", topology.seed},
        {"domain_sizes", topology.domain_sizes},
        {"bw_range_mbit", {topology.bw_range_mbit.first, topology.bw_range_mbit.second}},
        {"capped_domain", capped}}},
      {"traffic",
       {{"bw_list", traffic.bw_list},
        {"flow_count", traffic.flow_count},
        {"amplitude", traffic.amplitude},
        {"period_ticks", traffic.period_ticks}}},
      {"seed", seed},
      {"out_dir", out_dir},
      {"collect", {{"episodes", collect_episodes}, {"ticks", collect_ticks}}},
      {"tm",
       {{"weights", tm.weights.w},
        {"mu1", tm.mu1},
        {"mu2", tm.mu2},
        {"bw_floor_mbit", tm.params.bw_floor_mbit},
        {"count_scale", tm.params.count_scale}}},
      {"reward", {{"phi", reward.phi}}},
      {"sim",
       {{"queue_factor", sim.queue_factor},
        {"max_utilization", sim.max_utilization},
        {"error_probability", sim.error_probability},
        {"probe_jitter_ms", sim.probe_jitter_ms},
        {"echo_rtt_ms", sim.echo_rtt_ms},
        {"packet_bytes", sim.packet_bytes}}},
      {"agent",
       {{"seq", seq},
        {"horizon", horizon},
        {"candidates", candidates},
        {"use_prediction", use_prediction},
        {"explore_fraction", explore_fraction}}},
      {"gru",
       {{"lr", gru.lr}, {"batch", gru.batch}, {"epochs", gru.epochs}, {"hidden", gru.hidden}, {"layers", gru.layers}}},
      {"dqn",
       {{"gamma", dqn.gamma},
        {"lr", dqn.lr},
        {"batch", dqn.batch},
        {"freq", dqn.freq},
        {"tau", dqn.tau},
        {"episodes", dqn.episodes},
        {"trunk", dqn.trunk},
        {"replay_capacity", dqn.replay_capacity},
        {"e_max", dqn.sched.e_max},
        {"e_min", dqn.sched.e_min},
        {"total_steps", dqn.sched.total_steps},
        {"use_decay", dqn.sched.use_decay},
        {"decay", dqn.sched.decay}}},
      {"eval",
       {{"loads", eval.loads},
        {"seeds", eval.seeds},
        {"warmup_ticks", eval.warmup_ticks},
        {"window_ticks", eval.window_ticks},
        {"interval_s", eval.interval_s},
        {"root_wait_ms", eval.root_wait_ms}}},
      {"root_addr", root_addr},
  };
}

ExperimentConfig ExperimentConfig::from_json(const Json& doc) {
  if (!doc.is_object()) raise(Errc::MalformedConfig, "config must be a JSON object");
  ExperimentConfig c;

  const Json& topo = section(doc, "topology");
  read_into(topo, "file", c.topology.file);
  read_into(topo, "seed", c.topology.seed);
  read_into(topo, "domain_sizes", c.topology.domain_sizes);
  if (topo.contains("bw_range_mbit")) {
    std::vector<double> r;
    read_into(topo, "bw_range_mbit", r);
    if (r.size() != 2) raise(Errc::MalformedConfig, "bw_range_mbit needs two values");
    c.topology.bw_range_mbit = {r[0], r[1]};
  }
  if (topo.contains("capped_domain")) {
    if (topo["capped_domain"].is_null()) {
      c.topology.capped.reset();
    } else {
      CappedDomain cd;
      read_into(topo["capped_domain"], "domain", cd.domain);
      read_into(topo["capped_domain"], "cap_mbit", cd.cap_mbit);
      c.topology.capped = cd;
    }
  }

  const Json& tr = section(doc, "traffic");
  read_into(tr, "bw_list", c.traffic.bw_list);
  read_into(tr, "flow_count", c.traffic.flow_count);
  read_into(tr, "amplitude", c.traffic.amplitude);
  read_into(tr, "period_ticks", c.traffic.period_ticks);

  read_into(doc, "seed", c.seed);
  read_into(doc, "out_dir", c.out_dir);

  const Json& col = section(doc, "collect");
  read_into(col, "episodes", c.collect_episodes);
  read_into(col, "ticks", c.collect_ticks);

  const Json& tm = section(doc, "tm");
  read_into(tm, "weights", c.tm.weights.w);
  read_into(tm, "mu1", c.tm.mu1);
  read_into(tm, "mu2", c.tm.mu2);
  read_into(tm, "bw_floor_mbit", c.tm.params.bw_floor_mbit);
  read_into(tm, "count_scale", c.tm.params.count_scale);

  read_into(section(doc, "reward"), "phi", c.reward.phi);

  const Json& sim = section(doc, "sim");
  read_into(sim, "queue_factor", c.sim.queue_factor);
  read_into(sim, "max_utilization", c.sim.max_utilization);
  read_into(sim, "error_probability", c.sim.error_probability);
  read_into(sim, "probe_jitter_ms", c.sim.probe_jitter_ms);
  read_into(sim, "echo_rtt_ms", c.sim.echo_rtt_ms);
  read_into(sim, "packet_bytes", c.sim.packet_bytes);

  const Json& ag = section(doc, "agent");
  read_into(ag, "seq", c.seq);
  read_into(ag, "horizon", c.horizon);
  read_into(ag, "candidates", c.candidates);
  read_into(ag, "use_prediction", c.use_prediction);
  read_into(ag, "explore_fraction", c.explore_fraction);

  const Json& gru = section(doc, "gru");
  read_into(gru, "lr", c.gru.lr);
  read_into(gru, "batch", c.gru.batch);
  read_into(gru, "epochs", c.gru.epochs);
  read_into(gru, "hidden", c.gru.hidden);
  read_into(gru, "layers", c.gru.layers);

  const Json& dqn = section(doc, "dqn");
  read_into(dqn, "gamma", c.dqn.gamma);
  read_into(dqn, "lr", c.dqn.lr);
  read_into(dqn, "batch", c.dqn.batch);
  read_into(dqn, "freq", c.dqn.freq);
  read_into(dqn, "tau", c.dqn.tau);
  read_into(dqn, "episodes", c.dqn.episodes);
  read_into(dqn, "trunk", c.dqn.trunk);
  read_into(dqn, "replay_capacity", c.dqn.replay_capacity);
  read_into(dqn, "e_max", c.dqn.sched.e_max);
  read_into(dqn, "e_min", c.dqn.sched.e_min);
  read_into(dqn, "total_steps", c.dqn.sched.total_steps);
  read_into(dqn, "use_decay", c.dqn.sched.use_decay);
  read_into(dqn, "decay", c.dqn.sched.decay);

  const Json& ev = section(doc, "eval");
  read_into(ev, "loads", c.eval.loads);
  read_into(ev, "seeds", c.eval.seeds);
  read_into(ev, "warmup_ticks", c.eval.warmup_ticks);
  read_into(ev, "window_ticks", c.eval.window_ticks);
  read_into(ev, "interval_s", c.eval.interval_s);
  read_into(ev, "root_wait_ms", c.eval.root_wait_ms);

  read_into(doc, "root_addr", c.root_addr);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  const std::string text = read_text(path, Errc::MalformedConfig);
  const Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) raise(Errc::MalformedConfig, path + " is not valid JSON");
  ExperimentConfig cfg = from_json(doc);
  if (!cfg.topology.file.empty() && fs::path(cfg.topology.file).is_relative()) {
    cfg.topology.file = (fs::path(path).parent_path() / cfg.topology.file).string();
  }
  return cfg;
}

std::vector<Scope> agent_scopes(const NetworkGraph& graph) {
  std::vector<Scope> out{Scope::global()};
  for (DomainId d : graph.domain_ids()) out.push_back(Scope::of_domain(d));
  return out;
}

std::string scope_file_label(Scope scope) { return scope.label(); }

NetworkGraph make_graph(const ExperimentConfig& cfg) {
  if (!cfg.topology.file.empty()) return load_topology_file(cfg.topology.file);
  return generate_experiment_topology(cfg.topology.seed, cfg.topology.domain_sizes, cfg.topology.bw_range_mbit,
                                      cfg.topology.capped);
}

std::size_t resolved_candidates(const ExperimentConfig& cfg, const NetworkGraph& graph) {
  return cfg.candidates == 0 ? candidate_count(graph) : cfg.candidates;
}

// ------------------------------------------------------------------ pools

namespace {

constexpr std::size_t kCollectEpisodeBase = std::size_t{1} << 20;

}  // namespace

PoolSet collect_pools(const std::shared_ptr<const NetworkGraph>& graph, const AgentCandidates& cands,
                      const ExperimentConfig& cfg) {
  const NetworkGraph& g = *graph;
  const TrafficProcess traffic(g, cfg.traffic, cfg.seed);
  PoolSet pools;
  Tick counter = 0;
  const RoutingPlan base;
  for (std::size_t e = 0; e < cfg.collect_episodes; ++e) {
    const auto ep = traffic.episode(kCollectEpisodeBase + e);
    SimState sim(graph, cfg.seed * 1000003ULL + e, cfg.sim);
    for (std::size_t t = 0; t < cfg.collect_ticks; ++t) {
      sim.clear_flows();
      for (const FlowDemand& d : traffic.demands_at(ep, sim.clock())) {
        sim.assign_flow(d, compose_route(g, cands, base, d.src, d.dst));
      }
      sim.step(1.0);
      const SimSnapshot snap = sim.snapshot();
      ++counter;
      std::map<DomainId, TrafficMatrix> domain_tms;
      for (DomainId d : g.domain_ids()) {
        TrafficMatrix tm = build_tm(collect_info(snap, Scope::of_domain(d)), cfg.tm.weights, cfg.tm.params);
        tm.tick = counter;
        pools[Scope::of_domain(d).label()].push_back(tm);
        domain_tms.emplace(d, std::move(tm));
      }
      TrafficMatrix border = build_tm(collect_info(snap, Scope::border()), cfg.tm.weights, cfg.tm.params);
      border.tick = counter;
      pools[Scope::global().label()].push_back(assemble_utm(g, domain_tms, border));
    }
  }
  return pools;
}

void write_pool(const std::string& path, const NetworkGraph& graph, Scope scope, const std::vector<TrafficMatrix>& tms) {
  Json ticks = Json::array();
  Json mats = Json::array();
  for (const TrafficMatrix& tm : tms) {
    if (tm.scope != scope) raise(Errc::ScopeMismatch, "pool mixes scopes");
    if (tm.normalized) raise(Errc::ScopeMismatch, "pools hold un-normalized matrices");
    ticks.push_back(tm.tick);
    mats.push_back(tm_to_csv(graph, tm));
  }
  write_text(path, Json{{"scope", scope.label()}, {"ticks", ticks}, {"matrices", mats}}.dump(1) + "\n");
}

std::vector<TrafficMatrix> read_pool(const std::string& path, const NetworkGraph& graph) {
  const Json doc = Json::parse(read_text(path, Errc::InsufficientPool), nullptr, false);
  if (doc.is_discarded() || !doc.contains("scope") || !doc.contains("ticks") || !doc.contains("matrices")) {
    raise(Errc::MalformedConfig, path + " is not a pool dump");
  }
  const Scope scope = Scope::parse(doc["scope"].get<std::string>());
  const auto ticks = doc["ticks"].get<std::vector<Tick>>();
  const auto mats = doc["matrices"].get<std::vector<std::string>>();
  if (ticks.size() != mats.size()) raise(Errc::MalformedConfig, path + ": tick and matrix counts differ");
  std::vector<TrafficMatrix> out;
  out.reserve(mats.size());
  for (std::size_t i = 0; i < mats.size(); ++i) out.push_back(tm_from_csv(graph, mats[i], scope, ticks[i]));
  return out;
}

// --------------------------------------------------------------- training

ScopeTraining train_scope(const std::shared_ptr<const NetworkGraph>& graph,
                          const std::shared_ptr<const AgentCandidates>& cands, const ExperimentConfig& cfg, Scope scope,
                          const std::vector<TrafficMatrix>& pool) {
  const std::size_t ordinal = scope_ordinal(*graph, scope);
  ScopeTraining out;
  out.scope = scope;
  if (cfg.use_prediction) {
    if (pool.size() <= cfg.seq) raise(Errc::InsufficientPool, "pool of " + scope.label() + " is too small");
    GruHyper gh = cfg.gru;
    gh.seed = cfg.seed * 1000 + ordinal;
    const TimeSeries series = timeseriesify(pool, cfg.seq, cfg.tm.mu1, cfg.tm.mu2);
    out.predictor.emplace(pool.front().size(), cfg.seq, gh, cfg.tm.mu1, cfg.tm.mu2);
    out.gru_loss = train_gru(*out.predictor, series, gh);
  }

  RoutingEnvConfig ec;
  ec.scope = scope;
  ec.horizon = cfg.horizon;
  ec.seq = cfg.seq;
  ec.use_prediction = cfg.use_prediction;
  ec.tm = cfg.tm;
  ec.reward = cfg.reward;
  ec.sim = cfg.sim;
  RoutingEnv env(graph, cands, TrafficProcess(*graph, cfg.traffic, cfg.seed),
                 out.predictor ? &*out.predictor : nullptr, ec, cfg.seed * 7919 + ordinal);

  DqnHyper h = cfg.dqn;
  h.seed = cfg.seed * 1000 + 100 + ordinal;
  if (h.sched.total_steps == 0) {
    const double steps = static_cast<double>(h.episodes * cfg.horizon) * cfg.explore_fraction;
    h.sched.total_steps = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(steps));
  }
  out.dqn = train_dqn(env, h);
  return out;
}

ModelPaths ModelPaths::in(const std::string& out_dir, Scope scope) {
  const fs::path root(out_dir);
  const std::string l = scope_file_label(scope);
  return {(root / "models" / ("gru_" + l + ".xdrm")).string(), (root / "models" / ("dqn_" + l + ".xdrm")).string(),
          (root / "traces" / ("reward_" + l + ".csv")).string(), (root / "traces" / ("gru_loss_" + l + ".csv")).string()};
}

void save_training(const ScopeTraining& t, const ModelPaths& paths) {
  fs::create_directories(fs::path(paths.dqn).parent_path());
  auto policy = t.dqn.policy;
  nn::save_checkpoint_file(paths.dqn, policy.params());
  std::string rewards = "episode,reward\n";
  char buf[64];
  for (std::size_t i = 0; i < t.dqn.episode_rewards.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, t.dqn.episode_rewards[i]);
    rewards += buf;
  }
  write_text(paths.reward_trace, rewards);
  if (t.predictor) {
    auto pred = *t.predictor;
    nn::save_checkpoint_file(paths.gru, pred.params());
    std::string losses = "epoch,loss\n";
    for (std::size_t i = 0; i < t.gru_loss.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, t.gru_loss[i]);
      losses += buf;
    }
    write_text(paths.loss_trace, losses);
  }
}

DrlTpModel load_model(const NetworkGraph& graph, const AgentCandidates& cands, const ExperimentConfig& cfg, Scope scope,
                      const ModelPaths& paths) {
  DrlTpModel m;
  m.scope = scope;
  m.candidates = cands.of(scope);
  m.mu1 = cfg.tm.mu1;
  m.mu2 = cfg.tm.mu2;
  const std::size_t n = make_scope_view(graph, scope).size();
  if (cfg.use_prediction) {
    m.predictor.emplace(n, cfg.seq, cfg.gru, cfg.tm.mu1, cfg.tm.mu2, nn::Init::Zero);
    nn::load_checkpoint_file(paths.gru, m.predictor->params());
  }
  std::mt19937_64 rng(0);
  m.qnet = DuelingQNet(m.state_dim(), m.candidates.size(), cfg.dqn.trunk, rng);
  nn::load_checkpoint_file(paths.dqn, m.qnet.params());
  return m;
}

// ------------------------------------------------------------- evaluation

std::string algorithm_label(Algorithm a) {
  switch (a) {
    case Algorithm::MdrlTp:
      return "mdrl-tp";
    case Algorithm::Dijkstra:
      return "dijkstra";
    case Algorithm::Ospf:
      return "ospf";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::MdrlTp, Algorithm::Dijkstra, Algorithm::Ospf}) {
    if (algorithm_label(a) == s) return a;
  }
  raise(Errc::MalformedConfig, "unknown algorithm '" + std::string(s) + "'");
}

namespace {

std::vector<LinkMetricFrame> run_static(const std::shared_ptr<const NetworkGraph>& graph, const ExperimentConfig& cfg,
                                        const std::vector<FlowDemand>& demands, const PathMatrix& routes,
                                        std::uint64_t seed) {
  SimState sim(graph, seed, cfg.sim);
  for (const FlowDemand& d : demands) sim.assign_flow(d, routes.path(d.src, d.dst));
  std::vector<LinkMetricFrame> frames;
  for (std::size_t t = 0; t < cfg.eval.warmup_ticks + cfg.eval.window_ticks; ++t) {
    sim.step(cfg.eval.interval_s);
    if (t >= cfg.eval.warmup_ticks) frames.push_back(measure_frame(sim));
  }
  return frames;
}

// The root and one local controller per domain run over loopback. Each tick
// the locals stream their domain TM, the root assembles the union view and
// picks its candidate, every agent then acts on its latest window, and
// cross-domain flows get their inter path from the root.
std::vector<LinkMetricFrame> run_mdrl(const std::shared_ptr<const NetworkGraph>& graph, const AgentCandidates& cands,
                                      const ExperimentConfig& cfg, const ModelSet& models,
                                      const std::vector<FlowDemand>& demands, std::uint64_t seed, EvalTrace* trace) {
  const NetworkGraph& g = *graph;
  std::mutex root_mutex;
  std::size_t root_action = 0;
  std::map<Tick, TrafficMatrix> border_tms;

  coop::RootOptions ro;
  ro.bind = coop::Endpoint::parse(cfg.root_addr);
  coop::RootServer root(graph, ro);
  root.set_border_source([&](Tick t) -> std::optional<TrafficMatrix> {
    std::lock_guard lock(root_mutex);
    const auto it = border_tms.find(t);
    if (it == border_tms.end()) return std::nullopt;
    return it->second;
  });
  root.set_path_oracle([&](NodeIndex s, NodeIndex d) -> std::optional<Path> {
    std::lock_guard lock(root_mutex);
    return cands.root.at(root_action).path(s, d);
  });
  root.start();

  std::map<DomainId, std::unique_ptr<coop::LocalClient>> clients;
  for (DomainId d : g.domain_ids()) {
    coop::ClientOptions co;
    co.root = {ro.bind.host, root.port()};
    auto c = std::make_unique<coop::LocalClient>(graph, d, "local-" + std::to_string(d), co);
    c->connect();
    c->local_register();
    clients.emplace(d, std::move(c));
  }

  const auto scopes = agent_scopes(g);
  std::map<std::string, std::vector<TrafficMatrix>> windows;
  RoutingPlan plan;
  SimState sim(graph, seed, cfg.sim);
  std::vector<LinkMetricFrame> frames;

  for (std::size_t t = 0; t < cfg.eval.warmup_ticks + cfg.eval.window_ticks; ++t) {
    if (t >= cfg.eval.warmup_ticks) {
      for (Scope s : scopes) {
        const std::string label = s.label();
        const auto& win = windows.at(label);
        const RouteChoice choice = drl_tp_route(models.at(label), win.back(), win);
        plan.set(s, choice.action);
        if (trace) ++trace->actions[label][choice.action];
      }
      std::lock_guard lock(root_mutex);
      root_action = plan.root;
    }

    std::map<DomainId, const PathMatrix*> intra;
    for (const auto& [d, set] : cands.local) intra[d] = &set.at(plan.action_of(Scope::of_domain(d)));
    sim.clear_flows();
    for (const FlowDemand& d : demands) {
      coop::LocalClient& client = *clients.at(g.domain_of(d.src));
      const Path p = mdrl_tp_route(g, intra, [&](NodeIndex s, NodeIndex e) {
        if (trace) ++trace->inter_requests;
        return client.request_inter_path(s, e);
      }, d);
      sim.assign_flow(d, p);
    }
    sim.step(cfg.eval.interval_s);
    if (t >= cfg.eval.warmup_ticks) frames.push_back(measure_frame(sim));

    const SimSnapshot snap = sim.snapshot();
    {
      std::lock_guard lock(root_mutex);
      border_tms[snap.tick] = build_tm(collect_info(snap, Scope::border()), cfg.tm.weights, cfg.tm.params);
    }
    for (DomainId d : g.domain_ids()) {
      const TrafficMatrix tm = build_tm(collect_info(snap, Scope::of_domain(d)), cfg.tm.weights, cfg.tm.params);
      clients.at(d)->syn_global_view({tm});
      clients.at(d)->flush();
      auto& win = windows[Scope::of_domain(d).label()];
      win.push_back(normalize_tm(tm, cfg.tm.mu1, cfg.tm.mu2));
      if (win.size() > cfg.seq) win.erase(win.begin());
    }
    if (!root.wait_for_tick(snap.tick, cfg.eval.root_wait_ms)) {
      raise(Errc::Timeout, "root did not receive every domain matrix of tick " + std::to_string(snap.tick));
    }
    const std::optional<TrafficMatrix> utm = root.assemble(snap.tick);
    if (!utm) raise(Errc::TickMismatch, "root could not assemble tick " + std::to_string(snap.tick));
    auto& gwin = windows[Scope::global().label()];
    gwin.push_back(normalize_tm(*utm, cfg.tm.mu1, cfg.tm.mu2));
    if (gwin.size() > cfg.seq) gwin.erase(gwin.begin());
  }
  for (auto& [d, c] : clients) c->close();
  root.stop();
  return frames;
}

MetricTriple& operator+=(MetricTriple& a, const MetricTriple& b) {
  a.throughput += b.throughput;
  a.delay_ms += b.delay_ms;
  a.loss += b.loss;
  return a;
}

MetricTriple scaled(MetricTriple a, double s) { return {a.throughput * s, a.delay_ms * s, a.loss * s}; }

}  // namespace

std::vector<AveragedReport> evaluate(const std::shared_ptr<const NetworkGraph>& graph,
                                     const std::shared_ptr<const AgentCandidates>& cands, const ExperimentConfig& cfg,
                                     const std::vector<Algorithm>& algorithms, const ModelSet* models,
                                     EvalTrace* trace) {
  cfg.validate();
  const NetworkGraph& g = *graph;
  const bool wants_mdrl = std::find(algorithms.begin(), algorithms.end(), Algorithm::MdrlTp) != algorithms.end();
  if (wants_mdrl) {
    if (!models) raise(Errc::MissingCheckpoint, "mdrl-tp needs trained models");
    for (Scope s : agent_scopes(g)) {
      if (!models->count(s.label())) raise(Errc::MissingCheckpoint, "no model for " + s.label());
    }
  }
  const std::vector<double> loads = cfg.eval.loads.empty() ? cfg.traffic.bw_list : cfg.eval.loads;

  std::optional<PathMatrix> dijkstra;
  std::optional<PathMatrix> ospf;
  if (std::find(algorithms.begin(), algorithms.end(), Algorithm::Dijkstra) != algorithms.end()) {
    dijkstra = dijkstra_paths(g, hop_weights(g));
  }
  if (std::find(algorithms.begin(), algorithms.end(), Algorithm::Ospf) != algorithms.end()) {
    // Link costs from one round of probes on the idle network.
    SimState idle(graph, cfg.seed, cfg.sim);
    LinkWeights delays(g.edge_count());
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) delays[e] = idle.probe_delay(e);
    ospf = ospf_paths(g, delays);
  }

  std::vector<AveragedReport> out;
  for (Algorithm alg : algorithms) {
    for (double load : loads) {
      AveragedReport sum;
      sum.algorithm = algorithm_label(alg);
      sum.offered_load_mbit = load;
      for (std::uint64_t seed : cfg.eval.seeds) {
        std::mt19937_64 rng(seed);
        const auto demands = random_demand_set(g, g.node_count(), load, rng);
        std::vector<LinkMetricFrame> frames;
        switch (alg) {
          case Algorithm::Dijkstra:
            frames = run_static(graph, cfg, demands, *dijkstra, seed);
            break;
          case Algorithm::Ospf:
            frames = run_static(graph, cfg, demands, *ospf, seed);
            break;
          case Algorithm::MdrlTp:
            frames = run_mdrl(graph, *cands, cfg, *models, demands, seed, trace);
            break;
        }
        const AveragedReport r = average_report(g, frames, sum.algorithm, load);
        sum.global += r.global;
        for (const auto& [d, m] : r.domains) sum.domains[d] += m;
      }
      const double inv = 1.0 / static_cast<double>(cfg.eval.seeds.size());
      sum.global = scaled(sum.global, inv);
      for (auto& [d, m] : sum.domains) m = scaled(m, inv);
      out.push_back(std::move(sum));
    }
  }
  return out;
}

std::pair<double, double> decile_means(const std::vector<double>& rewards) {
  if (rewards.empty()) raise(Errc::EmptyWindow, "no episode rewards");
  const std::size_t dec = std::max<std::size_t>(1, rewards.size() / 10);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < dec; ++i) {
    first += rewards[i];
    last += rewards[rewards.size() - 1 - i];
  }
  return {first / static_cast<double>(dec), last / static_cast<double>(dec)};
}

}  // namespace xdr
