#include "xdr/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xdr/error.hpp"

namespace xdr {

// ---------------------------------------------------------------- exploration

void EpsilonSchedule::validate() const {
  if (!(0.0 <= e_min && e_min <= e_max && e_max <= 1.0)) {
    raise(Errc::InvalidRange, "epsilon schedule needs 0 <= e_min <= e_max <= 1");
  }
  if (total_steps == 0 && !use_decay) raise(Errc::InvalidRange, "epsilon schedule needs total_steps > 0");
  if (use_decay && decay < 0.0) raise(Errc::InvalidRange, "epsilon decay must be non-negative");
}

double EpsilonSchedule::at(std::uint64_t steps) const {
  if (use_decay) return std::max(e_min, e_max - static_cast<double>(steps) * decay);
  if (steps >= total_steps) return e_min;
  const double u = static_cast<double>(steps) / static_cast<double>(total_steps);
  return e_max + u * (e_min - e_max);
}

// ------------------------------------------------------------------ replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) raise(Errc::InvalidRange, "replay capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(e));
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (n > items_.size()) raise(Errc::InsufficientSamples, "replay buffer holds fewer experiences than requested");
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<const Experience*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(&items_[idx[i]]);
  }
  return out;
}

// ------------------------------------------------------------ dueling network

DuelingQNet::DuelingQNet(std::size_t state_dim, std::size_t actions, const std::vector<std::size_t>& trunk_sizes,
                         std::mt19937_64& rng) {
  if (state_dim == 0 || actions == 0) raise(Errc::ShapeMismatch, "dueling network needs positive dimensions");
  std::size_t in = state_dim;
  for (std::size_t width : trunk_sizes) {
    trunk_.emplace_back(in, width, nn::Activation::Relu, rng);
    in = width;
  }
  value_ = nn::Dense(in, 1, nn::Activation::Identity, rng);
  advantage_ = nn::Dense(in, actions, nn::Activation::Identity, rng);
}

Matrix DuelingQNet::features(const Matrix& states, Cache* cache) const {
  if (cache) cache->trunk.assign(trunk_.size(), {});
  Matrix h = states;
  for (std::size_t i = 0; i < trunk_.size(); ++i) h = trunk_[i].forward(h, cache ? &cache->trunk[i] : nullptr);
  return h;
}

Matrix DuelingQNet::forward(const Matrix& states, Cache* cache) const {
  if (states.cols() != static_cast<Eigen::Index>(state_dim())) {
    raise(Errc::ShapeMismatch, "state length " + std::to_string(states.cols()) + " does not match network input " +
                                   std::to_string(state_dim()));
  }
  const Matrix h = features(states, cache);
  const Matrix v = value_.forward(h, cache ? &cache->value : nullptr);
  Matrix q = advantage_.forward(h, cache ? &cache->advantage : nullptr);
  q.colwise() += v.col(0);
  return q;
}

Vector DuelingQNet::q_values(const Vector& state) const {
  Matrix row = state.transpose();
  return forward(row).row(0).transpose();
}

Vector DuelingQNet::value(const Matrix& states) const { return value_.forward(features(states, nullptr)).col(0); }

Matrix DuelingQNet::advantage(const Matrix& states) const { return advantage_.forward(features(states, nullptr)); }

void DuelingQNet::backward(const Cache& cache, const Matrix& dq) {
  const Matrix dv = dq.rowwise().sum();
  Matrix dh = advantage_.backward(cache.advantage, dq);
  dh += value_.backward(cache.value, dv);
  for (std::size_t i = trunk_.size(); i-- > 0;) dh = trunk_[i].backward(cache.trunk[i], dh);
}

nn::ParamList DuelingQNet::params() {
  nn::ParamList p;
  for (std::size_t i = 0; i < trunk_.size(); ++i) trunk_[i].collect(p, "trunk" + std::to_string(i));
  value_.collect(p, "value");
  advantage_.collect(p, "advantage");
  return p;
}

std::size_t argmax_action(const Vector& q) {
  if (q.size() == 0) raise(Errc::ShapeMismatch, "empty Q vector");
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q(i) > q(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

std::size_t select_action(const DuelingQNet& qnet, const Vector& state, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) > 1.0 - epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, qnet.action_count() - 1);
    return pick(rng);
  }
  return argmax_action(qnet.q_values(state));
}

// ------------------------------------------------------------------- reward

void RewardWeights::validate() const {
  for (double p : phi) {
    if (!(p >= 0.0 && p <= 1.0)) raise(Errc::InvalidRange, "reward weights must lie in [0, 1]");
  }
}

double reward_over_links(const NetworkGraph& graph, const InfoMatrices& info, const std::vector<EdgeIndex>& links,
                         const RewardWeights& weights) {
  if (links.empty()) raise(Errc::EmptyPathSet, "reward needs at least one traversed link");
  const auto n = static_cast<Eigen::Index>(info.nodes.size());
  std::vector<int> local(graph.node_count(), -1);
  for (Eigen::Index i = 0; i < n; ++i) local[info.nodes[static_cast<std::size_t>(i)]] = static_cast<int>(i);

  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
  cells.reserve(links.size());
  for (EdgeIndex e : links) {
    const auto& edge = graph.edge(e);
    const int a = local[edge.u];
    const int b = local[edge.v];
    if (a < 0 || b < 0 || !info.links(a, b)) raise(Errc::InvalidPath, "traversed link lies outside the reward scope");
    cells.emplace_back(a, b);
  }

  double ur = 0.0;
  for (std::size_t k = 0; k < kIndicatorCount; ++k) {
    const Matrix& m = info.values[k];
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!info.links(i, j)) continue;
        lo = std::min(lo, m(i, j));
        hi = std::max(hi, m(i, j));
      }
    }
    double sum = 0.0;
    if (hi > lo) {
      for (const auto& [a, b] : cells) sum += (m(a, b) - lo) / (hi - lo);
    }
    const double mean = sum / static_cast<double>(cells.size());
    ur += (k == 0 ? 1.0 : -1.0) * weights.phi[k] * mean;
  }
  return ur;
}

std::vector<EdgeIndex> links_of(const NetworkGraph& graph, const PathMatrix& paths) {
  std::vector<char> seen(graph.edge_count(), 0);
  const std::size_t n = paths.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (EdgeIndex e : path_edges(graph, paths.at(i, j))) seen[e] = 1;
    }
  }
  std::vector<EdgeIndex> out;
  for (EdgeIndex e = 0; e < seen.size(); ++e) {
    if (seen[e]) out.push_back(e);
  }
  return out;
}

double compute_reward(const NetworkGraph& graph, const InfoMatrices& info, const PathMatrix& chosen,
                      const RewardWeights& weights) {
  return reward_over_links(graph, info, links_of(graph, chosen), weights);
}

// -------------------------------------------------------------- environments

ContrivedEnv::ContrivedEnv(std::uint64_t seed, std::size_t horizon) : rng_(seed), horizon_(horizon) {
  if (horizon_ == 0) raise(Errc::InvalidRange, "horizon must be positive");
}

Vector ContrivedEnv::encode(std::size_t state) {
  Vector v = Vector::Zero(2);
  v(static_cast<Eigen::Index>(state)) = 1.0;
  return v;
}

Vector ContrivedEnv::reset() {
  t_ = 0;
  state_ = std::uniform_int_distribution<std::size_t>(0, 1)(rng_);
  return encode(state_);
}

StepResult ContrivedEnv::step(std::size_t action) {
  if (action > 1) raise(Errc::InvalidRange, "action out of range");
  ++t_;
  state_ = std::uniform_int_distribution<std::size_t>(0, 1)(rng_);
  return {encode(state_), payoff(action), t_ >= horizon_};
}

// --------------------------------------------------------------- DQN training

void DqnHyper::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) raise(Errc::InvalidRange, "gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) raise(Errc::InvalidRange, "tau must lie in (0, 1]");
  if (batch == 0 || freq == 0) raise(Errc::InvalidRange, "batch and freq must be positive");
  sched.validate();
}

double td_target(double reward, bool terminal, double gamma, const Vector& target_q_next) {
  if (terminal) return reward;
  return reward + gamma * target_q_next.maxCoeff();
}

DqnResult train_dqn(Environment& env, const DqnHyper& hyper,
                    const std::function<void(std::size_t, double)>& on_episode) {
  hyper.validate();
  if (hyper.episodes < 1) raise(Errc::InsufficientPool, "no episodes to train on");

  std::mt19937_64 rng(hyper.seed);
  DqnResult result;
  result.policy = DuelingQNet(env.state_dim(), env.action_count(), hyper.trunk, rng);
  result.target = result.policy;
  auto policy_params = result.policy.params();
  auto target_params = result.target.params();
  nn::Optimizer opt({nn::OptimizerKind::Adam, hyper.lr});
  ReplayBuffer memory(hyper.replay_capacity);

  const auto k = static_cast<Eigen::Index>(env.action_count());
  const auto d = static_cast<Eigen::Index>(env.state_dim());
  Matrix states(static_cast<Eigen::Index>(hyper.batch), d);
  Matrix next_states(static_cast<Eigen::Index>(hyper.batch), d);

  for (std::size_t ep = 0; ep < hyper.episodes; ++ep) {
    Vector state = env.reset();
    double total = 0.0;
    for (;;) {
      const double eps = hyper.sched.at(result.steps);
      const std::size_t action = select_action(result.policy, state, eps, rng);
      StepResult sr = env.step(action);
      total += sr.reward;
      memory.push({state, action, sr.reward, sr.next_state, sr.terminal});
      state = std::move(sr.next_state);
      ++result.steps;

      if (memory.size() >= hyper.batch) {
        const auto batch = memory.sample(hyper.batch, rng);
        for (std::size_t i = 0; i < batch.size(); ++i) {
          states.row(static_cast<Eigen::Index>(i)) = batch[i]->state.transpose();
          next_states.row(static_cast<Eigen::Index>(i)) = batch[i]->next_state.transpose();
        }
        const Matrix q_next = result.target.forward(next_states);
        DuelingQNet::Cache cache;
        const Matrix q = result.policy.forward(states, &cache);
        Matrix dq = Matrix::Zero(q.rows(), k);
        const double scale = 2.0 / static_cast<double>(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          const auto a = static_cast<Eigen::Index>(batch[i]->action);
          const double t = td_target(batch[i]->reward, batch[i]->terminal, hyper.gamma, q_next.row(r).transpose());
          dq(r, a) = scale * (q(r, a) - t);
        }
        nn::zero_grads(policy_params);
        result.policy.backward(cache, dq);
        opt.apply(policy_params);
      }
      if (result.steps % hyper.freq == 0) nn::soft_update(target_params, policy_params, hyper.tau);
      if (sr.terminal) break;
    }
    result.episode_rewards.push_back(total);
    if (on_episode) on_episode(ep, total);
  }
  if (memory.size() < hyper.batch) raise(Errc::InsufficientPool, "run produced fewer experiences than one batch");
  return result;
}

// ------------------------------------------------------------ GRU prediction

TimeSeries::TimeSeries(Matrix frames, std::size_t seq) : frames_(std::move(frames)), seq_(seq) {
  if (seq_ == 0 || static_cast<std::size_t>(frames_.rows()) <= seq_) {
    raise(Errc::TooShort, "series of " + std::to_string(frames_.rows()) + " frames is too short for window " +
                              std::to_string(seq_));
  }
}

Matrix TimeSeries::window(std::size_t i) const {
  return frames_.middleRows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(seq_));
}

Vector TimeSeries::target(std::size_t i) const {
  return frames_.row(static_cast<Eigen::Index>(i + seq_)).transpose();
}

TimeSeries timeseriesify(const std::vector<TrafficMatrix>& tms, std::size_t seq, double mu1, double mu2) {
  if (tms.size() <= seq) {
    raise(Errc::TooShort, "series of " + std::to_string(tms.size()) + " matrices is too short for window " +
                              std::to_string(seq));
  }
  const auto dim = static_cast<Eigen::Index>(tms.front().size() * tms.front().size());
  Matrix frames(static_cast<Eigen::Index>(tms.size()), dim);
  for (std::size_t t = 0; t < tms.size(); ++t) {
    const TrafficMatrix norm = tms[t].normalized ? tms[t] : normalize_tm(tms[t], mu1, mu2);
    const Vector flat = norm.flatten();
    if (flat.size() != dim) raise(Errc::ShapeMismatch, "matrices of a series must share one shape");
    frames.row(static_cast<Eigen::Index>(t)) = flat.transpose();
  }
  return TimeSeries(std::move(frames), seq);
}

GruPredictor::GruPredictor(std::size_t nodes, std::size_t seq, const GruHyper& hyper, double mu1, double mu2,
                           nn::Init init)
    : nodes_(nodes), seq_(seq), mu1_(mu1), mu2_(mu2) {
  if (seq_ == 0) raise(Errc::WrongWindow, "window length must be positive");
  std::mt19937_64 rng(hyper.seed);
  net_ = nn::GruNetwork(nodes * nodes, hyper.hidden, hyper.layers, rng, init);
}

Vector GruPredictor::predict_raw(const Matrix& window) const {
  if (static_cast<std::size_t>(window.rows()) != seq_) raise(Errc::WrongWindow, "window length differs from seq");
  std::vector<Matrix> steps;
  steps.reserve(seq_);
  for (Eigen::Index t = 0; t < window.rows(); ++t) steps.push_back(window.row(t));
  return net_.forward(steps).row(0).transpose();
}

Vector GruPredictor::predict_flat(const Matrix& window) const {
  return predict_raw(window).cwiseMax(mu1_).cwiseMin(mu2_);
}

std::vector<double> train_gru(GruPredictor& pred, const TimeSeries& series, const GruHyper& hyper) {
  if (series.count() == 0) raise(Errc::TooShort, "no training windows");
  if (series.seq() != pred.seq() || series.dim() != pred.dim()) raise(Errc::ShapeMismatch, "series does not fit predictor");
  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
  nn::Optimizer opt({nn::OptimizerKind::Adam, hyper.lr});
  auto params = pred.params();
  auto& net = pred.network();

  std::vector<std::size_t> order(series.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::max<std::size_t>(1, hyper.batch);
  const auto dim = static_cast<Eigen::Index>(series.dim());
  std::vector<double> trace;

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const auto b = static_cast<Eigen::Index>(end - start);
      std::vector<Matrix> steps(series.seq(), Matrix(b, dim));
      Matrix target(b, dim);
      for (std::size_t i = start; i < end; ++i) {
        const auto r = static_cast<Eigen::Index>(i - start);
        const std::size_t w = order[i];
        for (std::size_t t = 0; t < series.seq(); ++t) {
          steps[t].row(r) = series.frames().row(static_cast<Eigen::Index>(w + t));
        }
        target.row(r) = series.frames().row(static_cast<Eigen::Index>(w + series.seq()));
      }
      nn::GruNetwork::Cache cache;
      const Matrix out = net.forward(steps, &cache);
      Matrix grad;
      const double loss = nn::mse_loss(out, target, &grad);
      nn::zero_grads(params);
      net.backward(cache, grad);
      opt.apply(params);
      loss_sum += loss * static_cast<double>(b);
    }
    trace.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return trace;
}

double evaluate_gru(const GruPredictor& pred, const TimeSeries& series) {
  double total = 0.0;
  for (std::size_t i = 0; i < series.count(); ++i) {
    const Vector diff = pred.predict_raw(series.window(i)) - series.target(i);
    total += diff.squaredNorm() / static_cast<double>(diff.size());
  }
  return total / static_cast<double>(series.count());
}

TrafficMatrix predict_tm(const GruPredictor& pred, const std::vector<TrafficMatrix>& recent) {
  if (recent.size() != pred.seq()) {
    raise(Errc::WrongWindow, "window holds " + std::to_string(recent.size()) + " matrices, expected " +
                                 std::to_string(pred.seq()));
  }
  const auto& last = recent.back();
  if (last.size() != pred.nodes()) raise(Errc::WrongWindow, "window matrices do not match the predictor size");
  const auto dim = static_cast<Eigen::Index>(pred.dim());
  Matrix window(static_cast<Eigen::Index>(recent.size()), dim);
  for (std::size_t t = 0; t < recent.size(); ++t) {
    if (!(recent[t].scope == last.scope) || recent[t].size() != last.size()) {
      raise(Errc::WrongWindow, "window mixes scopes or sizes");
    }
    const TrafficMatrix norm = recent[t].normalized ? recent[t] : normalize_tm(recent[t], pred.mu1(), pred.mu2());
    window.row(static_cast<Eigen::Index>(t)) = norm.flatten().transpose();
  }
  const Vector flat = pred.predict_flat(window);

  TrafficMatrix out;
  out.scope = last.scope;
  out.tick = last.tick + 1;
  out.nodes = last.nodes;
  out.links = last.links;
  out.normalized = true;
  out.mu1 = pred.mu1();
  out.mu2 = pred.mu2();
  const auto n = static_cast<Eigen::Index>(last.size());
  out.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out.values(i, j) = flat(i * n + j);
  }
  return out;
}

// ----------------------------------------------------------------- DRL-TP

std::size_t DrlTpModel::state_dim() const {
  const std::size_t n = candidates.empty() ? 0 : candidates.front().size();
  return (predictor ? 2 : 1) * n * n;
}

Vector build_state(const TrafficMatrix& tm_now, const TrafficMatrix* predicted, double mu1, double mu2) {
  const TrafficMatrix norm = tm_now.normalized ? tm_now : normalize_tm(tm_now, mu1, mu2);
  const Vector now = norm.flatten();
  if (!predicted) return now;
  const Vector next = predicted->flatten();
  if (next.size() != now.size()) raise(Errc::ShapeMismatch, "predicted matrix differs in size from the current one");
  Vector state(now.size() * 2);
  state << now, next;
  return state;
}

RouteChoice drl_tp_route(const DrlTpModel& model, const TrafficMatrix& tm_now, const std::vector<TrafficMatrix>& window) {
  if (model.candidates.empty()) raise(Errc::EmptyPathSet, "model has no candidate matrices");
  std::optional<TrafficMatrix> predicted;
  if (model.predictor) predicted = predict_tm(*model.predictor, window);
  const Vector state = build_state(tm_now, predicted ? &*predicted : nullptr, model.mu1, model.mu2);
  std::size_t action = 0;
  if (model.candidates.size() > 1) action = argmax_action(model.qnet.q_values(state));
  if (action >= model.candidates.size()) raise(Errc::InvalidRange, "network proposes an action outside the candidate set");
  return {action, &model.candidates[action]};
}

// ----------------------------------------------------------------- MDRL-TP

Path splice_route(const NetworkGraph& graph, const Path& inter, const std::map<DomainId, const PathMatrix*>& intra) {
  if (inter.empty()) return inter;
  Path out;
  out.reserve(inter.size());
  std::size_t i = 0;
  while (i < inter.size()) {
    const DomainId d = graph.domain_of(inter[i]);
    std::size_t j = i;
    while (j + 1 < inter.size() && graph.domain_of(inter[j + 1]) == d) ++j;
    const auto it = intra.find(d);
    if (it == intra.end() || it->second == nullptr || !it->second->contains(inter[i]) ||
        !it->second->contains(inter[j])) {
      return inter;
    }
    const Path& segment = it->second->path(inter[i], inter[j]);
    if (segment.empty()) return inter;
    out.insert(out.end(), segment.begin(), segment.end());
    i = j + 1;
  }
  if (!is_simple_path(graph, out, inter.front(), inter.back())) return inter;
  return out;
}

Path mdrl_tp_route(const NetworkGraph& graph, const std::map<DomainId, const PathMatrix*>& intra,
                   const InterPathRequest& request_inter, const FlowDemand& demand) {
  const DomainId ds = graph.domain_of(demand.src);
  if (ds == graph.domain_of(demand.dst)) {
    const auto it = intra.find(ds);
    if (it == intra.end() || it->second == nullptr) raise(Errc::NoPath, "no intra-domain matrix for the source domain");
    return it->second->path(demand.src, demand.dst);
  }
  const Path inter = request_inter(demand.src, demand.dst);
  if (!is_simple_path(graph, inter, demand.src, demand.dst)) {
    raise(Errc::NoPath, "inter-domain path from the root is not a valid route");
  }
  return splice_route(graph, inter, intra);
}

}  // namespace xdr
