#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xdr/linalg.hpp"
#include "xdr/neural.hpp"
#include "xdr/routing.hpp"
#include "xdr/telemetry.hpp"

namespace xdr {

// ---------------------------------------------------------------- exploration

struct EpsilonSchedule {
  double e_max = 0.95;
  double e_min = 0.05;
  std::uint64_t total_steps = 10000;
  // Per-step decrement variant; off unless use_decay is set.
  bool use_decay = false;
  double decay = 1e-4;

  void validate() const;
  double at(std::uint64_t steps) const;
};

// ------------------------------------------------------------------ replay

struct Experience {
  Vector state;
  std::size_t action = 0;
  double reward = 0.0;
  Vector next_state;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Experience& at(std::size_t i) const { return items_.at(i); }
  // Uniform sample of distinct entries. Throws InsufficientSamples.
  std::vector<const Experience*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Experience> items_;
};

// ------------------------------------------------------------ dueling network

// Shared relu trunk feeding a scalar value head and a k-wide advantage head,
// combined as Q = V + A.
class DuelingQNet {
 public:
  struct Cache {
    std::vector<nn::Dense::Cache> trunk;
    nn::Dense::Cache value;
    nn::Dense::Cache advantage;
  };

  DuelingQNet() = default;
  DuelingQNet(std::size_t state_dim, std::size_t actions, const std::vector<std::size_t>& trunk_sizes,
              std::mt19937_64& rng);

  std::size_t state_dim() const noexcept { return trunk_.empty() ? value_.in_dim() : trunk_.front().in_dim(); }
  std::size_t action_count() const noexcept { return advantage_.out_dim(); }

  // states: batch x state_dim -> batch x k
  Matrix forward(const Matrix& states, Cache* cache = nullptr) const;
  Vector q_values(const Vector& state) const;
  Vector value(const Matrix& states) const;       // VF per row
  Matrix advantage(const Matrix& states) const;   // AF per row
  void backward(const Cache& cache, const Matrix& dq);

  nn::ParamList params();
  std::vector<nn::Dense>& trunk() noexcept { return trunk_; }
  nn::Dense& value_head() noexcept { return value_; }
  nn::Dense& advantage_head() noexcept { return advantage_; }

 private:
  Matrix features(const Matrix& states, Cache* cache) const;

  std::vector<nn::Dense> trunk_;
  nn::Dense value_;
  nn::Dense advantage_;
};

// Lowest index among the maxima.
std::size_t argmax_action(const Vector& q);
// Random action when a uniform draw exceeds 1 - epsilon, else argmax.
std::size_t select_action(const DuelingQNet& qnet, const Vector& state, double epsilon, std::mt19937_64& rng);

// ------------------------------------------------------------------- reward

struct RewardWeights {
  std::array<double, kIndicatorCount> phi{0.5, 0.4, 0.3, 0.3, 0.3, 0.3};
  void validate() const;  // each in [0, 1]
};

// phi1 * mean(bw) - sum_{l>1} phi_l * mean(indicator_l), where each indicator
// is Min-Max scaled to [0, 1] over the scope's links and averaged over
// `links` (edge indices; each counted once). Throws EmptyPathSet.
double reward_over_links(const NetworkGraph& graph, const InfoMatrices& info, const std::vector<EdgeIndex>& links,
                         const RewardWeights& weights);
// Link set = every link traversed by any path of the matrix. Paths must stay
// inside the info scope (InvalidPath otherwise).
double compute_reward(const NetworkGraph& graph, const InfoMatrices& info, const PathMatrix& chosen,
                      const RewardWeights& weights);
std::vector<EdgeIndex> links_of(const NetworkGraph& graph, const PathMatrix& paths);

// -------------------------------------------------------------- environments

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool terminal = false;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual Vector reset() = 0;
  virtual StepResult step(std::size_t action) = 0;
};

// Two one-hot states, two actions. Action 0 pays 1, action 1 pays 0; the
// next state is drawn uniformly. Episodes end after `horizon` steps.
class ContrivedEnv final : public Environment {
 public:
  ContrivedEnv(std::uint64_t seed, std::size_t horizon = 10);

  std::size_t state_dim() const override { return 2; }
  std::size_t action_count() const override { return 2; }
  Vector reset() override;
  StepResult step(std::size_t action) override;
  static Vector encode(std::size_t state);
  static double payoff(std::size_t action) { return action == 0 ? 1.0 : 0.0; }

 private:
  std::mt19937_64 rng_;
  std::size_t horizon_;
  std::size_t t_ = 0;
  std::size_t state_ = 0;
};

// --------------------------------------------------------------- DQN training

struct DqnHyper {
  double gamma = 0.9;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t freq = 100;  // steps between soft target updates
  double tau = 0.1;
  std::size_t episodes = 100;
  EpsilonSchedule sched;
  std::vector<std::size_t> trunk{128, 128};
  std::size_t replay_capacity = 10000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DqnResult {
  DuelingQNet policy;
  DuelingQNet target;
  std::vector<double> episode_rewards;  // per-episode sums
  std::uint64_t steps = 0;
};

// Bellman target of one transition.
double td_target(double reward, bool terminal, double gamma, const Vector& target_q_next);

// Throws InsufficientPool when the run cannot produce one training batch.
DqnResult train_dqn(Environment& env, const DqnHyper& hyper,
                    const std::function<void(std::size_t episode, double reward)>& on_episode = {});

// ------------------------------------------------------------ GRU prediction

// Frames of a traffic-matrix series flattened to rows; window i covers rows
// [i, i + seq) and its target is row i + seq.
class TimeSeries {
 public:
  TimeSeries(Matrix frames, std::size_t seq);
  std::size_t count() const noexcept { return static_cast<std::size_t>(frames_.rows()) - seq_; }
  std::size_t seq() const noexcept { return seq_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(frames_.cols()); }
  Matrix window(std::size_t i) const;  // seq x dim
  Vector target(std::size_t i) const;
  const Matrix& frames() const noexcept { return frames_; }

 private:
  Matrix frames_;
  std::size_t seq_;
};

// Normalizes un-normalized inputs with (mu1, mu2) first. Throws TooShort
// unless tms.size() > seq.
TimeSeries timeseriesify(const std::vector<TrafficMatrix>& tms, std::size_t seq, double mu1 = 0.0, double mu2 = 1.0);

struct GruHyper {
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 20;
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::uint64_t seed = 1;
};

class GruPredictor {
 public:
  GruPredictor() = default;
  GruPredictor(std::size_t nodes, std::size_t seq, const GruHyper& hyper, double mu1 = 0.0, double mu2 = 1.0,
               nn::Init init = nn::Init::Uniform);

  std::size_t seq() const noexcept { return seq_; }
  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t dim() const noexcept { return nodes_ * nodes_; }
  double mu1() const noexcept { return mu1_; }
  double mu2() const noexcept { return mu2_; }
  nn::GruNetwork& network() noexcept { return net_; }
  const nn::GruNetwork& network() const noexcept { return net_; }
  nn::ParamList params() { nn::ParamList p; net_.collect(p, "gru"); return p; }

  // Raw network output for one flattened window (seq x dim).
  Vector predict_raw(const Matrix& window) const;
  // Clamped to [mu1, mu2].
  Vector predict_flat(const Matrix& window) const;

 private:
  nn::GruNetwork net_;
  std::size_t nodes_ = 0;
  std::size_t seq_ = 0;
  double mu1_ = 0.0;
  double mu2_ = 1.0;
};

// Per-epoch mean training loss. Throws TooShort on an empty series.
std::vector<double> train_gru(GruPredictor& pred, const TimeSeries& series, const GruHyper& hyper);
double evaluate_gru(const GruPredictor& pred, const TimeSeries& series);

// Window of exactly seq matrices of one scope and size, oldest first; inputs
// are normalized on the fly when needed. Throws WrongWindow.
TrafficMatrix predict_tm(const GruPredictor& pred, const std::vector<TrafficMatrix>& recent);

// ----------------------------------------------------------------- DRL-TP

struct DrlTpModel {
  Scope scope;
  CandidatePathSet candidates;
  DuelingQNet qnet;
  std::optional<GruPredictor> predictor;  // empty: state is the TM alone
  double mu1 = 0.0;
  double mu2 = 1.0;

  std::size_t state_dim() const;
};

// normalized tm_now, followed by the predicted next TM when a predictor is
// supplied.
Vector build_state(const TrafficMatrix& tm_now, const TrafficMatrix* predicted, double mu1, double mu2);

struct RouteChoice {
  std::size_t action = 0;
  const PathMatrix* paths = nullptr;
};

// Greedy (epsilon = 0) choice. `window` must hold seq matrices when the model
// has a predictor; it is ignored otherwise.
RouteChoice drl_tp_route(const DrlTpModel& model, const TrafficMatrix& tm_now, const std::vector<TrafficMatrix>& window);

// ----------------------------------------------------------------- MDRL-TP

// Replaces every maximal same-domain run of `inter` by the intra path of that
// domain between the run's entry and exit nodes. Falls back to `inter` when
// the spliced route is not simple or a domain has no intra matrix.
Path splice_route(const NetworkGraph& graph, const Path& inter, const std::map<DomainId, const PathMatrix*>& intra);

using InterPathRequest = std::function<Path(NodeIndex src, NodeIndex dst)>;

// Co-domain demands take the domain's intra path. Cross-domain demands ask
// `request_inter` (typically the coop client) and splice. Throws NoPath when
// the inter path is not a valid src -> dst route.
Path mdrl_tp_route(const NetworkGraph& graph, const std::map<DomainId, const PathMatrix*>& intra,
                   const InterPathRequest& request_inter, const FlowDemand& demand);

}  // namespace xdr
