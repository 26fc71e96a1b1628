#include <doctest.h>

#include <unistd.h>

#include <filesystem>

#include "helpers.hpp"
#include "xdr/experiment.hpp"

using namespace xdr;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.out_dir = out_dir;
  cfg.collect_episodes = 2;
  cfg.collect_ticks = 12;
  cfg.horizon = 6;
  cfg.seq = 3;
  cfg.candidates = 3;
  cfg.gru.hidden = 8;
  cfg.gru.epochs = 2;
  cfg.dqn.episodes = 4;
  cfg.dqn.batch = 8;
  cfg.dqn.trunk = {16};
  cfg.eval.loads = {3.0};
  cfg.eval.seeds = {1};
  cfg.eval.warmup_ticks = 3;
  cfg.eval.window_ticks = 2;
  return cfg;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("xdr_exp_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config json round trip") {
  ExperimentConfig cfg = tiny_config("somewhere");
  cfg.seed = 9;
  cfg.reward.phi = {0.5, 0.1, 0.1, 0.1, 0.1, 0.1};
  cfg.use_prediction = false;
  const nlohmann::json doc = cfg.to_json();
  const ExperimentConfig back = ExperimentConfig::from_json(doc);
  CHECK(back.to_json() == doc);
  CHECK(back.seed == 9);
  CHECK_FALSE(back.use_prediction);
  CHECK(ExperimentConfig::from_json(nlohmann::json::object()).to_json() == ExperimentConfig{}.to_json());

  nlohmann::json bad = doc;
  bad["agent"]["horizon"] = 0;
  CHECK(throws_code([&] { ExperimentConfig::from_json(bad).validate(); }, Errc::InvalidRange));
  CHECK(throws_code([] { ExperimentConfig::load("/nonexistent/config.json"); }, Errc::MalformedConfig));
}

TEST_CASE("agent scopes and candidate count") {
  const ExperimentConfig cfg;
  const NetworkGraph g = make_graph(cfg);
  CHECK(g.node_count() == 39);
  const auto scopes = agent_scopes(g);
  REQUIRE(scopes.size() == 4);
  CHECK(scopes[0] == Scope::global());
  CHECK(scopes[3] == Scope::of_domain(3));
  CHECK(resolved_candidates(cfg, g) == 17);
  CHECK(resolved_candidates(tiny_config("x"), g) == 3);
}

TEST_CASE("traffic episodes cycle through the load list") {
  const NetworkGraph g = fixture();
  const TrafficProcess tp(g, TrafficConfig{}, 4);
  const auto e0 = tp.episode(0);
  const auto e10 = tp.episode(10);
  CHECK(e0.level == 1.0);
  CHECK(tp.episode(5).level == 6.0);
  CHECK(e10.level == 1.0);
  CHECK(e0.pairs == e10.pairs);
  CHECK(e0.phases == e10.phases);
  CHECK(e0.pairs.size() == 39);
  for (const auto& [s, t] : e0.pairs) CHECK(s != t);
  for (Tick t = 0; t < 16; ++t) {
    const double r = tp.rate(e0, 0, t);
    CHECK(r >= 0.75 - 1e-12);
    CHECK(r <= 1.25 + 1e-12);
  }
  const TrafficProcess other(g, TrafficConfig{}, 5);
  CHECK(other.episode(0).pairs != e0.pairs);
}

TEST_CASE("composed routes under a plan") {
  const NetworkGraph g = fixture();
  const auto cands = AgentCandidates::build(g, 3);
  RoutingPlan plan;
  plan.set(Scope::global(), 2);
  plan.set(Scope::of_domain(1), 1);
  CHECK(plan.action_of(Scope::global()) == 2);
  CHECK(plan.action_of(Scope::of_domain(2)) == 0);
  for (NodeIndex s = 0; s < 39; s += 3) {
    for (NodeIndex t = 0; t < 39; t += 4) {
      if (s == t) continue;
      const Path p = compose_route(g, cands, plan, s, t);
      CHECK(is_simple_path(g, p, s, t));
      if (g.domain_of(s) == g.domain_of(t)) {
        CHECK(p == cands.local.at(g.domain_of(s))[plan.action_of(Scope::of_domain(g.domain_of(s)))].path(s, t));
      }
    }
  }
}

TEST_CASE("routing environment episodes") {
  const auto g = shared(fixture());
  const auto cands = std::make_shared<const AgentCandidates>(AgentCandidates::build(*g, 3));
  RoutingEnvConfig rc;
  rc.scope = Scope::of_domain(2);
  rc.horizon = 4;
  rc.seq = 3;
  rc.use_prediction = false;
  RoutingEnv env(g, cands, TrafficProcess(*g, TrafficConfig{}, 1), nullptr, rc, 1);
  CHECK(env.state_dim() == 13 * 13);
  CHECK(env.action_count() == 3);
  const Vector s0 = env.reset();
  CHECK(s0.size() == 169);
  CHECK(s0.minCoeff() >= 0.0);
  CHECK(s0.maxCoeff() <= 1.0);
  const RewardWeights w;
  for (int i = 0; i < 4; ++i) {
    const StepResult r = env.step(static_cast<std::size_t>(i % 3));
    CHECK(r.terminal == (i == 3));
    CHECK(r.reward <= w.phi[0]);
  }
  CHECK(env.episodes_started() == 1);
}

TEST_CASE("pools, training, checkpoints and evaluation") {
  TempDir tmp;
  const ExperimentConfig cfg = tiny_config(tmp.path.string());
  const auto g = std::make_shared<const NetworkGraph>(make_graph(cfg));
  const auto cands = std::make_shared<const AgentCandidates>(AgentCandidates::build(*g, resolved_candidates(cfg, *g)));

  const PoolSet pools = collect_pools(g, *cands, cfg);
  CHECK(pools.size() == 4);
  CHECK(pools.at("global").size() == 24);
  CHECK(pools.at("domain2").front().size() == 13);
  CHECK(pools.at("global").front().size() == 39);
  const PoolSet again = collect_pools(g, *cands, cfg);
  for (const auto& [label, tms] : pools) {
    for (std::size_t i = 0; i < tms.size(); ++i) CHECK(tm_to_csv(*g, tms[i]) == tm_to_csv(*g, again.at(label)[i]));
  }

  const std::string pool_file = (tmp.path / "pool.json").string();
  write_pool(pool_file, *g, Scope::of_domain(1), pools.at("domain1"));
  const auto read_back = read_pool(pool_file, *g);
  REQUIRE(read_back.size() == pools.at("domain1").size());
  CHECK(tm_to_csv(*g, read_back.back()) == tm_to_csv(*g, pools.at("domain1").back()));

  ModelSet models;
  for (Scope scope : agent_scopes(*g)) {
    const ScopeTraining t = train_scope(g, cands, cfg, scope, pools.at(scope.label()));
    CHECK(t.predictor.has_value());
    CHECK(t.gru_loss.size() == 2);
    CHECK(t.dqn.episode_rewards.size() == 4);
    const ModelPaths paths = ModelPaths::in(cfg.out_dir, scope);
    save_training(t, paths);
    CHECK(fs::exists(paths.gru));
    CHECK(fs::exists(paths.dqn));
    models.emplace(scope.label(), load_model(*g, *cands, cfg, scope, paths));
  }
  std::size_t checkpoints = 0;
  for (const auto& entry : fs::recursive_directory_iterator(tmp.path)) {
    if (entry.path().extension() == ".xdrm") ++checkpoints;
  }
  CHECK(checkpoints == 8);

  ModelPaths missing = ModelPaths::in(cfg.out_dir, Scope::global());
  missing.dqn += ".absent";
  CHECK(throws_code([&] { load_model(*g, *cands, cfg, Scope::global(), missing); }, Errc::MissingCheckpoint));

  EvalTrace trace;
  const auto reports = evaluate(g, cands, cfg, {Algorithm::MdrlTp, Algorithm::Dijkstra}, &models, &trace);
  REQUIRE(reports.size() == 2);
  CHECK(trace.inter_requests > 0);
  CHECK(trace.actions.size() == 4);
  for (const AveragedReport& r : reports) {
    CHECK(r.offered_load_mbit == 3.0);
    CHECK(r.domains.size() == 3);
    CHECK(std::isfinite(r.global.throughput));
    CHECK(r.global.loss >= 0.0);
  }
  CHECK(throws_code([&] { evaluate(g, cands, cfg, {Algorithm::MdrlTp}, nullptr); }, Errc::MissingCheckpoint));
}

TEST_CASE("baseline evaluation is deterministic") {
  ExperimentConfig cfg = tiny_config("unused");
  cfg.eval.loads = {2.0, 7.0};
  const auto g = std::make_shared<const NetworkGraph>(make_graph(cfg));
  const auto cands = std::make_shared<const AgentCandidates>(AgentCandidates::build(*g, 3));
  const auto a = evaluate(g, cands, cfg, {Algorithm::Dijkstra, Algorithm::Ospf}, nullptr);
  const auto b = evaluate(g, cands, cfg, {Algorithm::Dijkstra, Algorithm::Ospf}, nullptr);
  CHECK(emit_report(a) == emit_report(b));
  CHECK(a.size() == 4);
  cfg.eval.warmup_ticks = cfg.seq - 1;
  CHECK(throws_code([&] { evaluate(g, cands, cfg, {Algorithm::Dijkstra}, nullptr); }, Errc::InvalidRange));
  CHECK(parse_algorithm(algorithm_label(Algorithm::Ospf)) == Algorithm::Ospf);
  CHECK(throws_code([] { parse_algorithm("bgp"); }, Errc::MalformedConfig));
}

TEST_CASE("decile means") {
  std::vector<double> r(100);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<double>(i);
  const auto [first, last] = decile_means(r);
  CHECK(first == doctest::Approx(4.5));
  CHECK(last == doctest::Approx(94.5));
  const auto [one_a, one_b] = decile_means({3.0});
  CHECK(one_a == 3.0);
  CHECK(one_b == 3.0);
  CHECK(throws_code([] { decile_means({}); }, Errc::EmptyWindow));
}
