#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdr/agents.hpp"
#include "xdr/coopcomm.hpp"
#include "xdr/metrics.hpp"
#include "xdr/routing_env.hpp"

namespace xdr {

struct TopologySource {
  std::string file;  // used when non-empty
  std::uint64_t seed = 7;
  std::vector<int> domain_sizes{13, 13, 13};
  std::pair<double, double> bw_range_mbit{1.0, 10.0};
  std::optional<CappedDomain> capped = CappedDomain{1, 5.0};
};

struct EvalSettings {
  std::vector<double> loads;  // empty: the traffic bw_list
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t warmup_ticks = 5;
  std::size_t window_ticks = 10;
  double interval_s = 1.0;
  int root_wait_ms = 5000;
};

struct ExperimentConfig {
  ExperimentConfig() { dqn.sched.total_steps = 0; }

  TopologySource topology;
  TrafficConfig traffic;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  std::size_t collect_episodes = 20;
  std::size_t collect_ticks = 50;

  TmSettings tm;
  RewardWeights reward;
  SimParams sim;
  std::size_t seq = 5;
  std::size_t horizon = 50;
  std::size_t candidates = 0;  // 0: derived from the largest domain
  bool use_prediction = true;
  GruHyper gru;
  DqnHyper dqn;
  // dqn.sched.total_steps of 0 means exploration spans this fraction of the
  // training steps.
  double explore_fraction = 0.8;

  EvalSettings eval;
  std::string root_addr = "127.0.0.1:0";

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& doc);  // missing keys keep defaults
  static ExperimentConfig load(const std::string& path);
};

std::vector<Scope> agent_scopes(const NetworkGraph& graph);
std::string scope_file_label(Scope scope);

NetworkGraph make_graph(const ExperimentConfig& cfg);
std::size_t resolved_candidates(const ExperimentConfig& cfg, const NetworkGraph& graph);

// ------------------------------------------------------------------ pools

// Un-normalized TMs per scope label ("global", "domain1", ...). The global
// pool holds union matrices assembled from domain TMs and border entries.
using PoolSet = std::map<std::string, std::vector<TrafficMatrix>>;

PoolSet collect_pools(const std::shared_ptr<const NetworkGraph>& graph, const AgentCandidates& cands,
                      const ExperimentConfig& cfg);
void write_pool(const std::string& path, const NetworkGraph& graph, Scope scope, const std::vector<TrafficMatrix>& tms);
std::vector<TrafficMatrix> read_pool(const std::string& path, const NetworkGraph& graph);

// --------------------------------------------------------------- training

struct ScopeTraining {
  Scope scope;
  std::optional<GruPredictor> predictor;
  std::vector<double> gru_loss;        // per epoch
  DqnResult dqn;
};

ScopeTraining train_scope(const std::shared_ptr<const NetworkGraph>& graph,
                          const std::shared_ptr<const AgentCandidates>& cands, const ExperimentConfig& cfg, Scope scope,
                          const std::vector<TrafficMatrix>& pool);

struct ModelPaths {
  std::string gru;
  std::string dqn;
  std::string reward_trace;
  std::string loss_trace;

  static ModelPaths in(const std::string& out_dir, Scope scope);
};

void save_training(const ScopeTraining& t, const ModelPaths& paths);
// Rebuilds a scope's routing model from its checkpoints. Throws
// MissingCheckpoint.
DrlTpModel load_model(const NetworkGraph& graph, const AgentCandidates& cands, const ExperimentConfig& cfg, Scope scope,
                      const ModelPaths& paths);

// ------------------------------------------------------------- evaluation

enum class Algorithm { MdrlTp, Dijkstra, Ospf };
std::string algorithm_label(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

// Trained models of the four agents, keyed by scope label.
using ModelSet = std::map<std::string, DrlTpModel>;

struct EvalTrace {
  // Actions chosen per agent during MDRL-TP runs: scope label -> action -> count.
  std::map<std::string, std::map<std::size_t, std::size_t>> actions;
  std::uint64_t inter_requests = 0;
};

// Per load: runs each seed's fixed demand set for warmup + window intervals
// and averages the window's metrics over seeds. MDRL-TP runs through a
// loopback root server and one client per domain. Throws MissingCheckpoint
// when MDRL-TP is requested without models.
std::vector<AveragedReport> evaluate(const std::shared_ptr<const NetworkGraph>& graph,
                                     const std::shared_ptr<const AgentCandidates>& cands, const ExperimentConfig& cfg,
                                     const std::vector<Algorithm>& algorithms, const ModelSet* models,
                                     EvalTrace* trace = nullptr);

// Mean episode reward over the first and the last tenth of a run.
std::pair<double, double> decile_means(const std::vector<double>& rewards);

}  // namespace xdr
