// Acceptance harness: one PASS/FAIL line per criterion. Optional arguments
// select criteria by number, e.g. `xdr_acceptance 1 3 7`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "helpers.hpp"
#include "xdr/experiment.hpp"

using namespace xdr;
using namespace testutil;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// ------------------------------------------------------------------ 1

Outcome gradients() {
  const auto t0 = Clock::now();
  double worst_dense = 0.0, worst_gru = 0.0;
  const nn::Activation acts[] = {nn::Activation::Identity, nn::Activation::Tanh, nn::Activation::Sigmoid,
                                 nn::Activation::Relu};
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 rng(seed);
    auto dim = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    const int in = dim(1, 6), out = dim(1, 6), batch = dim(1, 5);
    nn::Dense layer(static_cast<std::size_t>(in), static_cast<std::size_t>(out), acts[seed % 4], rng);
    const Matrix x = random_matrix(rng, batch, in);
    const Matrix w = random_matrix(rng, batch, out);
    nn::ParamList dp;
    layer.collect(dp, "dense");
    const auto dense = nn::grad_check([&] { return (layer.forward(x).array() * w.array()).sum(); },
                                      [&] {
                                        nn::zero_grads(dp);
                                        nn::Dense::Cache cache;
                                        layer.forward(x, &cache);
                                        layer.backward(cache, w);
                                      },
                                      dp);
    worst_dense = std::max(worst_dense, dense.max_rel_error);

    const int gin = dim(1, 4), hidden = dim(1, 5), layers = dim(1, 2), steps = dim(1, 4), gb = dim(1, 3);
    nn::GruNetwork net(static_cast<std::size_t>(gin), static_cast<std::size_t>(hidden), static_cast<std::size_t>(layers),
                       rng);
    std::vector<Matrix> window;
    for (int s = 0; s < steps; ++s) window.push_back(random_matrix(rng, gb, gin));
    const Matrix target = random_matrix(rng, gb, gin);
    nn::ParamList gp;
    net.collect(gp);
    const auto gru = nn::grad_check([&] { return nn::mse_loss(net.forward(window), target); },
                                    [&] {
                                      nn::zero_grads(gp);
                                      nn::GruNetwork::Cache cache;
                                      Matrix dy;
                                      nn::mse_loss(net.forward(window, &cache), target, &dy);
                                      net.backward(cache, dy);
                                    },
                                    gp);
    worst_gru = std::max(worst_gru, gru.max_rel_error);
  }
  const double t = seconds_since(t0);
  return {worst_dense < 1e-5 && worst_gru < 1e-5 && t < 30.0,
          fmt("100 configs, max rel error dense %.2e gru %.2e, %.1fs", worst_dense, worst_gru, t)};
}

// ------------------------------------------------------------------ 2

TrafficMatrix random_tm(std::mt19937_64& rng, bool constant) {
  const auto n = std::uniform_int_distribution<Eigen::Index>(2, 9)(rng);
  std::bernoulli_distribution link(0.5);
  std::uniform_real_distribution<double> value(-50.0, 50.0);
  const double c = value(rng);
  TrafficMatrix tm;
  tm.scope = Scope::global();
  tm.links = LinkMask::Constant(n, n, false);
  tm.values = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) tm.nodes.push_back(static_cast<NodeIndex>(i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && link(rng)) {
        tm.links(i, j) = true;
        tm.values(i, j) = constant ? c : value(rng);
      }
    }
  }
  // At least two links so that a range exists.
  tm.links(0, 1) = tm.links(1, 0) = true;
  tm.values(0, 1) = constant ? c : value(rng);
  tm.values(1, 0) = constant ? c : tm.values(0, 1) + 1.0;
  return tm;
}

Outcome normalization() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> bound(-5.0, 5.0);
  int failures = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    double mu1 = bound(rng), mu2 = bound(rng);
    if (mu1 > mu2) std::swap(mu1, mu2);
    if (mu2 - mu1 < 1e-3) mu2 = mu1 + 1.0;
    const TrafficMatrix tm = random_tm(rng, false);
    const TrafficMatrix nm = normalize_tm(tm, mu1, mu2);
    double lo = 1e300, hi = -1e300, nlo = 0.0, nhi = 0.0;
    std::vector<std::pair<double, double>> pairs;
    for (Eigen::Index i = 0; i < tm.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < tm.values.cols(); ++j) {
        if (!tm.links(i, j)) {
          if (nm.values(i, j) != mu2) ++failures;
          continue;
        }
        const double v = tm.values(i, j), w = nm.values(i, j);
        pairs.emplace_back(v, w);
        if (v < lo) lo = v, nlo = w;
        if (v > hi) hi = v, nhi = w;
      }
    }
    worst = std::max({worst, std::abs(nlo - mu1), std::abs(nhi - mu2)});
    for (std::size_t a = 0; a < pairs.size(); ++a) {
      for (std::size_t b = 0; b < pairs.size(); ++b) {
        if (pairs[a].first < pairs[b].first && !(pairs[a].second <= pairs[b].second)) ++failures;
        if (pairs[a].first == pairs[b].first && pairs[a].second != pairs[b].second) ++failures;
      }
    }
    const TrafficMatrix twice = normalize_tm(nm, mu1, mu2);
    worst = std::max(worst, (twice.values - nm.values).cwiseAbs().maxCoeff());

    const TrafficMatrix flat = normalize_tm(random_tm(rng, true), mu1, mu2);
    for (Eigen::Index i = 0; i < flat.values.size(); ++i) {
      if (flat.links.data()[i] && flat.values.data()[i] != mu1) ++failures;
    }
  }
  return {failures == 0 && worst <= 1e-12,
          fmt("1000 matrices, max endpoint/idempotence error %.1e, %d ordering or degenerate failures", worst, failures)};
}

// ------------------------------------------------------------------ 3

Outcome epsilon_schedule() {
  EpsilonSchedule s;
  s.e_max = 0.9;
  s.e_min = 0.05;
  s.total_steps = 1000;
  const double mid = s.at(500);
  const double expect = 0.9 + (0.05 - 0.9) * 0.5;
  const bool ok = s.at(0) == 0.9 && s.at(1000) == 0.05 && s.at(25000) == 0.05 && std::abs(mid - expect) <= 1e-12;
  return {ok, fmt("eps(0)=%.17g eps(T)=%.17g eps(T/2)=%.17g", s.at(0), s.at(1000), mid)};
}

// ------------------------------------------------------------------ 4

std::vector<Path> exhaustive_top_k(const NetworkGraph& g, NodeIndex s, NodeIndex t, std::size_t k) {
  std::vector<Path> all = all_simple_paths(g, s, t);
  std::sort(all.begin(), all.end(), [](const Path& a, const Path& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

Outcome path_oracles() {
  std::mt19937_64 rng(4);
  int dij_bad = 0, yen_bad = 0, pairs = 0, queries = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkGraph g = random_connected(rng, std::uniform_int_distribution<int>(2, 10)(rng), 0.3);
    const LinkWeights w = hop_weights(g);
    for (NodeIndex s = 0; s < g.node_count(); ++s) {
      for (NodeIndex t = 0; t < g.node_count(); ++t) {
        if (s == t) continue;
        ++pairs;
        if (shortest_path(g, s, t, w) != exhaustive_top_k(g, s, t, 1).front()) ++dij_bad;
      }
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkGraph g = random_connected(rng, std::uniform_int_distribution<int>(2, 8)(rng), 0.45);
    const LinkWeights w = hop_weights(g);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    for (NodeIndex s = 0; s < g.node_count(); ++s) {
      for (NodeIndex t = s + 1; t < g.node_count(); ++t) {
        ++queries;
        if (yen_k_shortest(g, s, t, k, w) != exhaustive_top_k(g, s, t, k)) ++yen_bad;
      }
    }
  }
  return {dij_bad == 0 && yen_bad == 0,
          fmt("dijkstra %d/%d pairs match, yen %d/%d queries match", pairs - dij_bad, pairs, queries - yen_bad, queries)};
}

// ------------------------------------------------------------------ 5

Outcome dqn_sanity() {
  const auto t0 = Clock::now();
  int optimal = 0;
  double worst_q = 0.0;
  std::uint64_t max_steps = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (double gamma : {0.9, 0.0}) {
      ContrivedEnv env(seed);
      DqnHyper h;
      h.gamma = gamma;
      h.lr = 5e-3;
      h.batch = 16;
      h.freq = 20;
      h.episodes = 500;
      h.trunk = {32};
      h.sched.total_steps = 2500;
      h.seed = seed;
      const DqnResult res = train_dqn(env, h);
      max_steps = std::max(max_steps, res.steps);
      bool greedy_ok = true;
      for (std::size_t s = 0; s < 2; ++s) {
        const Vector q = res.policy.q_values(ContrivedEnv::encode(s));
        greedy_ok = greedy_ok && argmax_action(q) == 0;
        if (gamma == 0.0) {
          for (std::size_t a = 0; a < 2; ++a) worst_q = std::max(worst_q, std::abs(q(a) - ContrivedEnv::payoff(a)));
        }
      }
      if (gamma != 0.0 && greedy_ok) ++optimal;
    }
  }
  const double t = seconds_since(t0);
  return {optimal >= 19 && worst_q < 0.1 && max_steps <= 5000 && t < 120.0,
          fmt("greedy optimal in %d/20 seeds, gamma=0 max |Q - r| %.3f, %llu steps, %.1fs", optimal, worst_q,
              static_cast<unsigned long long>(max_steps), t)};
}

// ------------------------------------------------------------------ 6

Outcome gru_period_two() {
  const auto t0 = Clock::now();
  const NetworkGraph g = fixture();
  SimState sim(shared(g), 6);
  const LinkWeights w = hop_weights(g);
  const auto nodes = g.domain_nodes(2);
  std::vector<TrafficMatrix> series;
  // Alternate between an idle and a loaded tick of domain 2.
  for (int t = 0; t < 60; ++t) {
    sim.clear_flows();
    if (t % 2 == 1) {
      for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        sim.assign_flow({nodes[i], nodes[i + 1], 3.0}, shortest_path(g, nodes[i], nodes[i + 1], w));
      }
    }
    sim.step();
    series.push_back(build_tm(collect_info(sim.snapshot(), Scope::of_domain(2)), TmWeights::defaults()));
  }
  const TimeSeries ts = timeseriesify(series, 4);
  GruHyper h;
  h.hidden = 16;
  h.epochs = 200;
  h.lr = 5e-3;
  h.batch = 16;
  GruPredictor pred(nodes.size(), 4, h);
  const auto losses = train_gru(pred, ts, h);
  Matrix targets(static_cast<Eigen::Index>(ts.count()), static_cast<Eigen::Index>(pred.dim()));
  for (std::size_t i = 0; i < ts.count(); ++i) targets.row(static_cast<Eigen::Index>(i)) = ts.target(i).transpose();
  const double variance = (targets.rowwise() - targets.colwise().mean()).array().square().mean();
  const double mse = evaluate_gru(pred, ts);
  const double t = seconds_since(t0);
  return {mse < 0.1 * variance && t < 60.0,
          fmt("final mse %.3e vs variance %.3e (ratio %.4f), loss %.3e -> %.3e, %.1fs", mse, variance, mse / variance,
              losses.front(), losses.back(), t)};
}

// ------------------------------------------------------------------ 7

Outcome protocol() {
  const auto t0 = Clock::now();
  const auto g = shared(fixture());
  coop::RootOptions ro;
  ro.bind = coop::Endpoint{"127.0.0.1", 0};
  coop::RootServer root(g, ro);
  const LinkWeights w = hop_weights(*g);
  root.set_path_oracle([&](NodeIndex s, NodeIndex t) -> std::optional<Path> { return shortest_path(*g, s, t, w); });

  SimState sim(g, 7);
  for (NodeIndex s = 0; s < 39; ++s) sim.assign_flow({s, (s + 20) % 39, 5.0}, shortest_path(*g, s, (s + 20) % 39, w));
  std::vector<SimSnapshot> snaps;
  for (int i = 0; i < 50; ++i) {
    sim.step();
    snaps.push_back(sim.snapshot());
  }
  const TmWeights tw = TmWeights::defaults();
  std::map<Tick, TrafficMatrix> borders;
  for (const auto& s : snaps) borders[s.tick] = build_tm(collect_info(s, Scope::border()), tw);
  root.set_border_source([&](Tick t) -> std::optional<TrafficMatrix> { return borders.at(t); });
  root.start();

  std::vector<std::unique_ptr<coop::LocalClient>> clients;
  for (DomainId d : g->domain_ids()) {
    coop::ClientOptions co;
    co.root = coop::Endpoint{"127.0.0.1", root.port()};
    clients.push_back(std::make_unique<coop::LocalClient>(g, d, "C" + std::to_string(d), co));
    clients.back()->connect();
    clients.back()->local_register();
  }
  const bool handshake = root.registry().size() == 3 &&
                         root.frames_received(coop::StatusCode::SetControllerName) == 3 &&
                         root.frames_received(coop::StatusCode::SetTopology) == 3 &&
                         root.frames_received(coop::StatusCode::AddInterDpid) == 3;

  std::uint64_t frames = 0;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const DomainId d = clients[i]->domain();
    std::vector<TrafficMatrix> tms;
    for (const auto& s : snaps) tms.push_back(build_tm(collect_info(s, Scope::of_domain(d)), tw));
    clients[i]->syn_global_view(tms);
    clients[i]->flush();
    frames += clients[i]->frames_sent(coop::StatusCode::SynGlobalView);
  }
  const bool delivered = root.wait_for_tick(snaps.back().tick, 5000);
  int identical = 0;
  for (const auto& s : snaps) {
    std::map<DomainId, TrafficMatrix> local;
    for (DomainId d : g->domain_ids()) local[d] = build_tm(collect_info(s, Scope::of_domain(d)), tw);
    const auto online = root.assemble(s.tick);
    if (online && tm_to_csv(*g, *online) == tm_to_csv(*g, assemble_utm(*g, local, borders.at(s.tick)))) ++identical;
  }

  std::atomic<int> matched{0};
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    workers.emplace_back([&, i] {
      const DomainId d = clients[i]->domain();
      const auto mine = g->domain_nodes(d);
      const auto theirs = g->domain_nodes(d % 3 + 1);
      for (std::size_t r = 0; r < 100; ++r) {
        const NodeIndex s = mine[r % mine.size()];
        const NodeIndex t = theirs[(r * 5) % theirs.size()];
        try {
          if (clients[i]->request_inter_path(s, t) == shortest_path(*g, s, t, w)) ++matched;
        } catch (const Error&) {
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  const std::uint64_t requests = root.frames_received(coop::StatusCode::ReqInterProperty);
  for (auto& c : clients) c->close();
  root.stop();
  const double t = seconds_since(t0);
  return {handshake && delivered && frames == 30 && identical == 50 && matched == 300 && requests == 300 && t < 10.0,
          fmt("handshake %s, %llu batched frames for 150 snapshots, %d/50 UTMs bit-identical, %d/300 requests "
              "correlated, %.2fs",
              handshake ? "ok" : "incomplete", static_cast<unsigned long long>(frames), identical, matched.load(), t)};
}

// ------------------------------------------------------------------ 8

Outcome conservation() {
  const auto g = shared(fixture());
  const LinkWeights w = hop_weights(*g);
  SimParams quiet;
  quiet.probe_jitter_ms = 0.0;
  std::uint64_t checks = 0, violations = 0, probe_mismatch = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const double load = 1.0 + static_cast<double>(seed % 10);
    const auto demands = random_demand_set(*g, 39, load, rng);
    const PathMatrix ospf_like = dijkstra_paths(*g, w);
    for (bool jitter : {true, false}) {
      SimState sim(g, seed, jitter ? SimParams{} : quiet);
      for (const FlowDemand& d : demands) sim.assign_flow(d, ospf_like.path(d.src, d.dst));
      for (int t = 0; t < 10; ++t) {
        sim.step();
        for (EdgeIndex e = 0; e < g->edge_count(); ++e) {
          const LinkRuntime& l = sim.link(e);
          ++checks;
          if (l.rx_pkts + l.drops != l.tx_pkts) ++violations;
          if (l.used_bw_mbit > g->edge(e).attr.capacity_mbit) ++violations;
          if (!(l.loss() >= 0.0 && l.loss() <= 1.0)) ++violations;
          if (!jitter && sim.probe_delay(e) != l.measured_delay_ms) ++probe_mismatch;
        }
      }
    }
  }
  return {violations == 0 && probe_mismatch == 0,
          fmt("%llu link-intervals, %llu bound violations, %llu zero-jitter probe mismatches",
              static_cast<unsigned long long>(checks), static_cast<unsigned long long>(violations),
              static_cast<unsigned long long>(probe_mismatch))};
}

// ------------------------------------------------------------- 9 and 10

ExperimentConfig training_config(std::uint64_t seed, bool prediction) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.use_prediction = prediction;
  cfg.gru.epochs = 8;
  cfg.dqn.episodes = 100;
  cfg.eval.loads = {6, 7, 8, 9, 10};
  cfg.eval.seeds = {1, 2, 3};
  return cfg;
}

struct TrainedRun {
  std::map<std::string, std::pair<double, double>> deciles;  // scope label -> (first, last)
  ModelSet models;
  double seconds = 0.0;
};

TrainedRun train_all(const std::shared_ptr<const NetworkGraph>& g, const std::shared_ptr<const AgentCandidates>& cands,
                     const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  TrainedRun run;
  const PoolSet pools = collect_pools(g, *cands, cfg);
  for (Scope scope : agent_scopes(*g)) {
    const ScopeTraining t = train_scope(g, cands, cfg, scope, pools.at(scope.label()));
    run.deciles[scope.label()] = decile_means(t.dqn.episode_rewards);
    DrlTpModel m;
    m.scope = scope;
    m.candidates = cands->of(scope);
    m.qnet = t.dqn.policy;
    m.predictor = t.predictor;
    m.mu1 = cfg.tm.mu1;
    m.mu2 = cfg.tm.mu2;
    run.models.emplace(scope.label(), std::move(m));
  }
  run.seconds = seconds_since(t0);
  return run;
}

struct Shared {
  std::shared_ptr<const NetworkGraph> graph;
  std::shared_ptr<const AgentCandidates> cands;
  std::map<std::pair<std::uint64_t, bool>, TrainedRun> runs;

  const TrainedRun& run(std::uint64_t seed, bool prediction) {
    const auto key = std::make_pair(seed, prediction);
    auto it = runs.find(key);
    if (it == runs.end()) it = runs.emplace(key, train_all(graph, cands, training_config(seed, prediction))).first;
    return it->second;
  }
};

Shared& shared_state() {
  static Shared s = [] {
    Shared out;
    const ExperimentConfig cfg = training_config(1, true);
    out.graph = std::make_shared<const NetworkGraph>(make_graph(cfg));
    out.cands =
        std::make_shared<const AgentCandidates>(AgentCandidates::build(*out.graph, resolved_candidates(cfg, *out.graph)));
    return out;
  }();
  return s;
}

Outcome directional_reproduction() {
  const auto t0 = Clock::now();
  Shared& st = shared_state();
  const TrainedRun& run = st.run(1, true);
  const ExperimentConfig cfg = training_config(1, true);
  const auto reports = evaluate(st.graph, st.cands, cfg, {Algorithm::MdrlTp, Algorithm::Dijkstra}, &run.models);
  std::map<double, std::map<std::string, MetricTriple>> by_load;
  for (const AveragedReport& r : reports) by_load[r.offered_load_mbit][r.algorithm] = r.global;
  bool ok = true;
  std::string detail;
  for (const auto& [load, algs] : by_load) {
    const MetricTriple& m = algs.at("mdrl-tp");
    const MetricTriple& d = algs.at("dijkstra");
    const bool thr = m.throughput >= d.throughput;
    const bool loss = m.loss <= d.loss;
    ok = ok && thr && loss;
    detail += fmt("%s%.0f: thr %.2f/%.2f%s loss %.5f/%.5f%s", detail.empty() ? "" : "; ", load, m.throughput,
                  d.throughput, thr ? "" : "(!)", m.loss, d.loss, loss ? "" : "(!)");
  }
  const double t = run.seconds + seconds_since(t0);
  ok = ok && t < 1800.0;
  return {ok, "mdrl/dijkstra per load " + detail + fmt(", train+eval %.0fs", t)};
}

Outcome reward_direction() {
  Shared& st = shared_state();
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  std::map<std::string, std::pair<double, double>> with_gru, ablation;
  for (std::uint64_t seed : seeds) {
    for (bool pred : {true, false}) {
      auto& acc = pred ? with_gru : ablation;
      for (const auto& [label, fl] : st.run(seed, pred).deciles) {
        acc[label].first += fl.first / static_cast<double>(seeds.size());
        acc[label].second += fl.second / static_cast<double>(seeds.size());
      }
    }
  }
  bool improves = true;
  double gru_final = 0.0, abl_final = 0.0;
  std::string detail;
  for (const auto& [label, fl] : with_gru) {
    const auto& ab = ablation.at(label);
    improves = improves && fl.second > fl.first && ab.second > ab.first;
    gru_final += fl.second;
    abl_final += ab.second;
    detail += fmt("%s %.2f->%.2f (ablation %.2f->%.2f); ", label.c_str(), fl.first, fl.second, ab.first, ab.second);
  }
  const bool gru_better = gru_final >= abl_final;
  return {improves && gru_better,
          detail + fmt("final decile sum gru %.2f vs ablation %.2f over seeds 1-3", gru_final, abl_final)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"normalization", normalization},
      {"epsilon schedule", epsilon_schedule},
      {"shortest path oracles", path_oracles},
      {"dqn sanity", dqn_sanity},
      {"gru period-2 prediction", gru_period_two},
      {"protocol integration", protocol},
      {"conservation and bounds", conservation},
      {"directional throughput and loss", directional_reproduction},
      {"reward convergence direction", reward_direction},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
