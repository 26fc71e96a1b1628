#include "xdr/routing_env.hpp"

#include <cmath>
#include <numbers>

#include "xdr/error.hpp"

namespace xdr {

AgentCandidates AgentCandidates::build(const NetworkGraph& graph, std::size_t k) {
  AgentCandidates out;
  out.root = build_candidates(graph, Scope::global(), k);
  for (DomainId d : graph.domain_ids()) out.local.emplace(d, build_candidates(graph, Scope::of_domain(d), k));
  return out;
}

const CandidatePathSet& AgentCandidates::of(Scope scope) const {
  if (scope.kind == Scope::Kind::Global) return root;
  if (scope.kind == Scope::Kind::Domain) {
    const auto it = local.find(scope.domain);
    if (it != local.end()) return it->second;
  }
  raise(Errc::ScopeMismatch, "no agent for scope " + scope.label());
}

std::size_t RoutingPlan::action_of(Scope scope) const {
  if (scope.kind == Scope::Kind::Global) return root;
  const auto it = local.find(scope.domain);
  return it == local.end() ? 0 : it->second;
}

void RoutingPlan::set(Scope scope, std::size_t action) {
  if (scope.kind == Scope::Kind::Global) {
    root = action;
  } else {
    local[scope.domain] = action;
  }
}

Path compose_route(const NetworkGraph& graph, const AgentCandidates& cands, const RoutingPlan& plan, NodeIndex src,
                   NodeIndex dst) {
  std::map<DomainId, const PathMatrix*> intra;
  for (const auto& [d, set] : cands.local) intra[d] = &set.at(plan.action_of(Scope::of_domain(d)));
  const DomainId ds = graph.domain_of(src);
  if (ds == graph.domain_of(dst)) return intra.at(ds)->path(src, dst);
  return splice_route(graph, cands.root.at(plan.root).path(src, dst), intra);
}

void TrafficConfig::validate() const {
  if (bw_list.empty()) raise(Errc::MalformedConfig, "bw_list must not be empty");
  for (std::size_t i = 0; i < bw_list.size(); ++i) {
    if (!(bw_list[i] > 0.0)) raise(Errc::InvalidRange, "bw_list levels must be positive");
    if (i > 0 && !(bw_list[i] > bw_list[i - 1])) raise(Errc::MalformedConfig, "bw_list must be ascending");
  }
  if (!(amplitude >= 0.0 && amplitude < 1.0)) raise(Errc::InvalidRange, "traffic amplitude must lie in [0, 1)");
  if (!(period_ticks > 0.0)) raise(Errc::InvalidRange, "traffic period must be positive");
}

TrafficProcess::TrafficProcess(const NetworkGraph& graph, TrafficConfig config, std::uint64_t seed)
    : nodes_(graph.node_count()), config_(std::move(config)), seed_(seed) {
  config_.validate();
  if (nodes_ < 2) raise(Errc::InvalidRange, "traffic needs at least two nodes");
}

TrafficProcess::Episode TrafficProcess::episode(std::size_t index) const {
  const std::size_t level = index % config_.bw_list.size();
  std::mt19937_64 rng(seed_ * 0x100000001b3ULL + level);
  Episode ep;
  ep.index = index;
  ep.level = config_.bw_list[level];
  const std::size_t count = config_.flow_count == 0 ? nodes_ : config_.flow_count;
  std::uniform_int_distribution<NodeIndex> pick(0, static_cast<NodeIndex>(nodes_ - 1));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  while (ep.pairs.size() < count) {
    const NodeIndex a = pick(rng);
    const NodeIndex b = pick(rng);
    if (a == b) continue;
    ep.pairs.emplace_back(a, b);
    ep.phases.push_back(phase(rng));
  }
  return ep;
}

double TrafficProcess::rate(const Episode& ep, std::size_t flow, Tick t) const {
  const double swing = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / config_.period_ticks + ep.phases.at(flow));
  return std::max(0.1, ep.level * (1.0 + config_.amplitude * swing));
}

std::vector<FlowDemand> TrafficProcess::demands_at(const Episode& ep, Tick t) const {
  std::vector<FlowDemand> out;
  out.reserve(ep.pairs.size());
  for (std::size_t i = 0; i < ep.pairs.size(); ++i) {
    out.push_back({ep.pairs[i].first, ep.pairs[i].second, rate(ep, i, t)});
  }
  return out;
}

std::vector<FlowDemand> random_demand_set(const NetworkGraph& graph, std::size_t count, double rate,
                                          std::mt19937_64& rng) {
  if (graph.node_count() < 2) raise(Errc::InvalidRange, "demand needs at least two nodes");
  if (!(rate > 0.0)) raise(Errc::InvalidRange, "demand rate must be positive");
  std::uniform_int_distribution<NodeIndex> pick(0, static_cast<NodeIndex>(graph.node_count() - 1));
  std::vector<FlowDemand> out;
  while (out.size() < count) {
    const NodeIndex a = pick(rng);
    const NodeIndex b = pick(rng);
    if (a != b) out.push_back({a, b, rate});
  }
  return out;
}

TrafficMatrix observe_tm(const SimSnapshot& snap, Scope scope, const TmSettings& tm) {
  return normalize_tm(build_tm(collect_info(snap, scope), tm.weights, tm.params), tm.mu1, tm.mu2);
}

RoutingEnv::RoutingEnv(std::shared_ptr<const NetworkGraph> graph, std::shared_ptr<const AgentCandidates> cands,
                       TrafficProcess traffic, const GruPredictor* predictor, RoutingEnvConfig config,
                       std::uint64_t seed)
    : graph_(std::move(graph)),
      cands_(std::move(cands)),
      traffic_(std::move(traffic)),
      predictor_(predictor),
      config_(std::move(config)),
      seed_(seed) {
  if (config_.scope.kind == Scope::Kind::Border) raise(Errc::ScopeMismatch, "no agent acts on the border scope");
  if (config_.horizon == 0 || config_.seq == 0) raise(Errc::InvalidRange, "horizon and seq must be positive");
  if (config_.use_prediction) {
    if (!predictor_) raise(Errc::MissingCheckpoint, "prediction enabled without a predictor");
    if (predictor_->seq() != config_.seq) raise(Errc::WrongWindow, "predictor window differs from seq");
  }
  (void)cands_->of(config_.scope);
}

std::size_t RoutingEnv::state_dim() const {
  const std::size_t n = make_scope_view(*graph_, config_.scope).size();
  return (config_.use_prediction ? 2 : 1) * n * n;
}

void RoutingEnv::advance(const RoutingPlan& plan) {
  SimState& sim = *sim_;
  sim.clear_flows();
  for (const FlowDemand& d : traffic_.demands_at(episode_, sim.clock())) {
    sim.assign_flow(d, compose_route(*graph_, *cands_, plan, d.src, d.dst));
  }
  sim.step(config_.interval_s);
  window_.push_back(observe_tm(sim.snapshot(), config_.scope, config_.tm));
  if (window_.size() > config_.seq) window_.erase(window_.begin());
}

Vector RoutingEnv::current_state() const {
  if (!config_.use_prediction) return build_state(window_.back(), nullptr, config_.tm.mu1, config_.tm.mu2);
  const TrafficMatrix predicted = predict_tm(*predictor_, window_);
  return build_state(window_.back(), &predicted, config_.tm.mu1, config_.tm.mu2);
}

Vector RoutingEnv::reset() {
  episode_ = traffic_.episode(episode_index_);
  sim_.emplace(graph_, seed_ + 7919 * episode_index_, config_.sim);
  ++episode_index_;
  window_.clear();
  t_ = 0;
  const RoutingPlan base;
  for (std::size_t i = 0; i < config_.seq; ++i) advance(base);
  return current_state();
}

StepResult RoutingEnv::step(std::size_t action) {
  if (!sim_) raise(Errc::InvalidRange, "step before reset");
  const auto& set = cands_->of(config_.scope);
  if (action >= set.size()) raise(Errc::InvalidRange, "action outside the candidate set");
  RoutingPlan plan;
  plan.set(config_.scope, action);
  advance(plan);
  ++t_;
  const InfoMatrices info = collect_info(sim_->snapshot(), config_.scope);
  StepResult out;
  out.reward = compute_reward(*graph_, info, set[action], config_.reward);
  out.next_state = current_state();
  out.terminal = t_ >= config_.horizon;
  return out;
}

}  // namespace xdr
