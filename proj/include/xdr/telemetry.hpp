#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xdr/linalg.hpp"
#include "xdr/netsim.hpp"
#include "xdr/topology.hpp"

namespace xdr {

enum class Indicator { RemainingBw = 0, Delay, Loss, UsedBw, Drops, Errors };
inline constexpr std::size_t kIndicatorCount = 6;

// The six per-link indicator matrices of one scope. Entries without a link
// are 0 and flagged false in `links`.
struct InfoMatrices {
  Scope scope;
  Tick tick = 0;
  std::vector<NodeIndex> nodes;  // global index of each row
  LinkMask links;
  std::array<Matrix, kIndicatorCount> values;  // indexed by Indicator

  std::size_t size() const noexcept { return nodes.size(); }
  const Matrix& operator[](Indicator i) const { return values[static_cast<std::size_t>(i)]; }
  Matrix& operator[](Indicator i) { return values[static_cast<std::size_t>(i)]; }
};

struct TmWeights {
  std::array<double, kIndicatorCount> w{};

  static TmWeights defaults() { return {{0.6, 0.3, 0.1, 0.1, 0.1, 0.1}}; }
  void validate() const;  // each weight in [0, 1], else InvalidRange
};

struct TmParams {
  double bw_floor_mbit = 0.01;  // guards 1 / L_bw on saturated links
  double count_scale = 1e-3;    // drops and errors enter as count / 1000
};

// Scalar-combined link state. Non-link entries hold +inf before
// normalization and mu2 after it.
struct TrafficMatrix {
  Scope scope;
  Tick tick = 0;
  std::vector<NodeIndex> nodes;
  LinkMask links;
  Matrix values;
  bool normalized = false;
  double mu1 = 0.0;
  double mu2 = 1.0;
  std::size_t floored_links = 0;  // links whose residual bandwidth hit the floor

  std::size_t size() const noexcept { return nodes.size(); }
  // Row-major flattening; non-links read as mu2 (the worst cost).
  Vector flatten() const;
};

InfoMatrices collect_info(const SimSnapshot& snapshot, Scope scope);

TrafficMatrix build_tm(const InfoMatrices& info, const TmWeights& weights, const TmParams& params = {});

// Min-Max rescaling of the on-link entries into [mu1, mu2]. A constant
// matrix maps to all-mu1. Throws InvalidRange unless mu1 < mu2.
TrafficMatrix normalize_tm(const TrafficMatrix& tm, double mu1 = 0.0, double mu2 = 1.0);

// Places per-domain matrices on the block diagonal of the global index and
// fills border-link entries from `border`. Inputs must be un-normalized and
// share one tick (TickMismatch otherwise). The result is un-normalized.
TrafficMatrix assemble_utm(const NetworkGraph& graph, const std::map<DomainId, TrafficMatrix>& domain_tms,
                           const TrafficMatrix& border);

// assemble_utm with border entries computed from indicator matrices, then
// normalized as one matrix.
TrafficMatrix build_utm(const NetworkGraph& graph, const std::map<DomainId, TrafficMatrix>& domain_tms,
                        const InfoMatrices& border_info, const TmWeights& weights, const TmParams& params = {},
                        double mu1 = 0.0, double mu2 = 1.0);

// Dump format: header of node ids, one CSV row per matrix row, %.17g values,
// `inf` for absent links.
std::string tm_to_csv(const NetworkGraph& graph, const TrafficMatrix& tm);
// Restores the mu2 sentinel when `normalized_bounds` is given.
TrafficMatrix tm_from_csv(const NetworkGraph& graph, const std::string& csv, Scope scope, Tick tick,
                          std::optional<std::pair<double, double>> normalized_bounds = std::nullopt);

// Bounded FIFO of matrix snapshots. Safe for concurrent producers.
class MatrixPool {
 public:
  explicit MatrixPool(std::size_t capacity);

  void push(TrafficMatrix tm);
  // Uniform sample without replacement. Throws InsufficientSamples.
  std::vector<TrafficMatrix> sample(std::size_t n, std::mt19937_64& rng) const;
  std::vector<TrafficMatrix> contents() const;  // oldest first
  std::size_t size() const;
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<TrafficMatrix> items_;
};

}  // namespace xdr
