#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "xdr/agents.hpp"
#include "xdr/netsim.hpp"
#include "xdr/routing.hpp"
#include "xdr/telemetry.hpp"

namespace xdr {

// Candidate sets of every agent: the root's over the whole graph and one per
// domain.
struct AgentCandidates {
  CandidatePathSet root;
  std::map<DomainId, CandidatePathSet> local;

  static AgentCandidates build(const NetworkGraph& graph, std::size_t k);
  std::size_t k() const noexcept { return root.size(); }
  const CandidatePathSet& of(Scope scope) const;
};

// Which candidate matrix each agent currently applies.
struct RoutingPlan {
  std::size_t root = 0;
  std::map<DomainId, std::size_t> local;

  std::size_t action_of(Scope scope) const;
  void set(Scope scope, std::size_t action);
};

// End-to-end path under a plan: co-domain pairs take their domain's intra
// path; other pairs take the root path spliced with intra paths.
Path compose_route(const NetworkGraph& graph, const AgentCandidates& cands, const RoutingPlan& plan, NodeIndex src,
                   NodeIndex dst);

struct TrafficConfig {
  std::vector<double> bw_list{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t flow_count = 0;  // 0 means one flow per node
  double amplitude = 0.25;     // relative swing of each flow's rate
  double period_ticks = 8.0;

  void validate() const;
};

// Seeded synthetic demand. Episodes cycle through bw_list in order; each
// level has its own fixed flow pairs and per-flow phases, so episodes e and
// e + |bw_list| replay the same traffic. Each flow's rate oscillates around
// the level.
class TrafficProcess {
 public:
  struct Episode {
    std::size_t index = 0;
    double level = 0.0;
    std::vector<std::pair<NodeIndex, NodeIndex>> pairs;
    std::vector<double> phases;
  };

  TrafficProcess(const NetworkGraph& graph, TrafficConfig config, std::uint64_t seed);

  const TrafficConfig& config() const noexcept { return config_; }
  Episode episode(std::size_t index) const;
  double rate(const Episode& ep, std::size_t flow, Tick t) const;
  std::vector<FlowDemand> demands_at(const Episode& ep, Tick t) const;

 private:
  std::size_t nodes_;
  TrafficConfig config_;
  std::uint64_t seed_;
};

// One flow per random ordered pair (src != dst), count flows, all at `rate`.
std::vector<FlowDemand> random_demand_set(const NetworkGraph& graph, std::size_t count, double rate,
                                          std::mt19937_64& rng);

struct TmSettings {
  TmWeights weights = TmWeights::defaults();
  TmParams params;
  double mu1 = 0.0;
  double mu2 = 1.0;
};

// Normalized TM of a scope straight from a snapshot.
TrafficMatrix observe_tm(const SimSnapshot& snap, Scope scope, const TmSettings& tm);

struct RoutingEnvConfig {
  Scope scope = Scope::global();
  std::size_t horizon = 50;  // T_ep
  std::size_t seq = 5;
  bool use_prediction = true;
  TmSettings tm;
  RewardWeights reward;
  SimParams sim;
  double interval_s = 1.0;
};

// Simulator-in-the-loop environment of one agent. Each episode warms up for
// seq ticks under the all-zero plan, then every step applies the agent's
// matrix (other agents keep matrix 0), advances one interval and scores the
// resulting scope snapshot.
class RoutingEnv final : public Environment {
 public:
  RoutingEnv(std::shared_ptr<const NetworkGraph> graph, std::shared_ptr<const AgentCandidates> cands,
             TrafficProcess traffic, const GruPredictor* predictor, RoutingEnvConfig config, std::uint64_t seed);

  std::size_t state_dim() const override;
  std::size_t action_count() const override { return cands_->of(config_.scope).size(); }
  Vector reset() override;
  StepResult step(std::size_t action) override;

  std::size_t episodes_started() const noexcept { return episode_index_; }
  const RoutingEnvConfig& config() const noexcept { return config_; }

 private:
  void advance(const RoutingPlan& plan);
  Vector current_state() const;

  std::shared_ptr<const NetworkGraph> graph_;
  std::shared_ptr<const AgentCandidates> cands_;
  TrafficProcess traffic_;
  const GruPredictor* predictor_;
  RoutingEnvConfig config_;
  std::uint64_t seed_;

  std::size_t episode_index_ = 0;
  TrafficProcess::Episode episode_;
  std::optional<SimState> sim_;
  std::vector<TrafficMatrix> window_;  // most recent normalized TMs, oldest first
  std::size_t t_ = 0;
};

}  // namespace xdr
