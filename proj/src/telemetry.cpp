#include "xdr/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "xdr/error.hpp"

namespace xdr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void TmWeights::validate() const {
  for (double x : w) {
    if (!(x >= 0.0 && x <= 1.0)) raise(Errc::InvalidRange, "traffic-matrix weights must lie in [0, 1]");
  }
}

Vector TrafficMatrix::flatten() const {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Vector out(n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i * n + j) = links(i, j) ? values(i, j) : mu2;
  }
  return out;
}

InfoMatrices collect_info(const SimSnapshot& snapshot, Scope scope) {
  if (!snapshot.graph) raise(Errc::ScopeMismatch, "snapshot carries no graph");
  const auto& graph = *snapshot.graph;
  if (snapshot.links.size() != graph.edge_count()) {
    raise(Errc::ScopeMismatch, "snapshot does not cover every link of the graph");
  }
  if (scope.kind == Scope::Kind::Domain &&
      std::find(graph.domain_ids().begin(), graph.domain_ids().end(), scope.domain) == graph.domain_ids().end()) {
    raise(Errc::ScopeMismatch, "no domain " + std::to_string(scope.domain) + " in graph");
  }
  const ScopeView view = make_scope_view(graph, scope);
  const auto n = static_cast<Eigen::Index>(view.size());

  InfoMatrices info;
  info.scope = scope;
  info.tick = snapshot.tick;
  info.nodes = view.nodes;
  info.links = LinkMask::Constant(n, n, false);
  for (auto& m : info.values) m = Matrix::Zero(n, n);

  for (EdgeIndex ei : view.links) {
    const auto& e = graph.edge(ei);
    const auto& rt = snapshot.links[ei];
    const Eigen::Index a = view.local_of[e.u];
    const Eigen::Index b = view.local_of[e.v];
    const std::array<double, kIndicatorCount> cell{e.attr.capacity_mbit - rt.used_bw_mbit,
                                                   rt.measured_delay_ms,
                                                   rt.loss(),
                                                   rt.used_bw_mbit,
                                                   static_cast<double>(rt.drops),
                                                   static_cast<double>(rt.errors)};
    for (std::size_t k = 0; k < kIndicatorCount; ++k) {
      info.values[k](a, b) = cell[k];
      info.values[k](b, a) = cell[k];
    }
    info.links(a, b) = true;
    info.links(b, a) = true;
  }
  return info;
}

TrafficMatrix build_tm(const InfoMatrices& info, const TmWeights& weights, const TmParams& params) {
  weights.validate();
  const auto n = static_cast<Eigen::Index>(info.size());
  TrafficMatrix tm;
  tm.scope = info.scope;
  tm.tick = info.tick;
  tm.nodes = info.nodes;
  tm.links = info.links;
  tm.values = Matrix::Constant(n, n, kInf);
  const auto& w = weights.w;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!info.links(i, j)) continue;
      double residual = info[Indicator::RemainingBw](i, j);
      if (residual < params.bw_floor_mbit) {
        residual = params.bw_floor_mbit;
        if (i < j) ++tm.floored_links;
      }
      tm.values(i, j) = w[0] / residual + w[1] * info[Indicator::Delay](i, j) + w[2] * info[Indicator::Loss](i, j) +
                        w[3] * info[Indicator::UsedBw](i, j) +
                        w[4] * info[Indicator::Drops](i, j) * params.count_scale +
                        w[5] * info[Indicator::Errors](i, j) * params.count_scale;
    }
  }
  return tm;
}

TrafficMatrix normalize_tm(const TrafficMatrix& tm, double mu1, double mu2) {
  if (!(mu1 < mu2)) raise(Errc::InvalidRange, "normalization bounds must satisfy mu1 < mu2");
  TrafficMatrix out = tm;
  out.normalized = true;
  out.mu1 = mu1;
  out.mu2 = mu2;

  double lo = kInf;
  double hi = -kInf;
  const auto rows = tm.values.rows();
  const auto cols = tm.values.cols();
  if (tm.links.rows() != rows || tm.links.cols() != cols) raise(Errc::ShapeMismatch, "link mask does not match the matrix");
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!tm.links(i, j)) continue;
      lo = std::min(lo, tm.values(i, j));
      hi = std::max(hi, tm.values(i, j));
    }
  }
  const bool degenerate = !(hi > lo);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!tm.links(i, j)) {
        out.values(i, j) = mu2;
        continue;
      }
      const double m = tm.values(i, j);
      double v;
      if (degenerate || m == lo) {
        v = mu1;
      } else if (m == hi) {
        v = mu2;
      } else {
        v = std::clamp(mu1 + (m - lo) / (hi - lo) * (mu2 - mu1), mu1, mu2);
      }
      out.values(i, j) = v;
    }
  }
  return out;
}

TrafficMatrix assemble_utm(const NetworkGraph& graph, const std::map<DomainId, TrafficMatrix>& domain_tms,
                           const TrafficMatrix& border) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  if (border.scope != Scope::border() || border.values.rows() != n) {
    raise(Errc::ScopeMismatch, "border matrix must span the global node index");
  }
  if (border.normalized) raise(Errc::ScopeMismatch, "border matrix must be un-normalized");
  TrafficMatrix utm;
  utm.scope = Scope::global();
  utm.tick = border.tick;
  utm.nodes.resize(graph.node_count());
  std::iota(utm.nodes.begin(), utm.nodes.end(), NodeIndex{0});
  utm.links = LinkMask::Constant(n, n, false);
  utm.values = Matrix::Constant(n, n, kInf);
  utm.floored_links = border.floored_links;

  for (DomainId d : graph.domain_ids()) {
    const auto it = domain_tms.find(d);
    if (it == domain_tms.end()) raise(Errc::ScopeMismatch, "missing traffic matrix for domain " + std::to_string(d));
    const auto& tm = it->second;
    if (tm.scope != Scope::of_domain(d) || tm.normalized) {
      raise(Errc::ScopeMismatch, "domain block must be an un-normalized domain matrix");
    }
    if (tm.tick != border.tick) raise(Errc::TickMismatch, "domain and border matrices come from different ticks");
    if (tm.nodes != graph.domain_nodes(d)) raise(Errc::ScopeMismatch, "domain matrix nodes do not match graph");
    const auto m = static_cast<Eigen::Index>(tm.nodes.size());
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!tm.links(i, j)) continue;
        utm.values(tm.nodes[i], tm.nodes[j]) = tm.values(i, j);
        utm.links(tm.nodes[i], tm.nodes[j]) = true;
      }
    }
    utm.floored_links += tm.floored_links;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!border.links(i, j)) continue;
      utm.values(i, j) = border.values(i, j);
      utm.links(i, j) = true;
    }
  }
  return utm;
}

TrafficMatrix build_utm(const NetworkGraph& graph, const std::map<DomainId, TrafficMatrix>& domain_tms,
                        const InfoMatrices& border_info, const TmWeights& weights, const TmParams& params, double mu1,
                        double mu2) {
  if (border_info.scope != Scope::border()) raise(Errc::ScopeMismatch, "border info must use the border scope");
  return normalize_tm(assemble_utm(graph, domain_tms, build_tm(border_info, weights, params)), mu1, mu2);
}

std::string tm_to_csv(const NetworkGraph& graph, const TrafficMatrix& tm) {
  std::string out;
  for (std::size_t i = 0; i < tm.nodes.size(); ++i) {
    if (i) out += ',';
    out += graph.node_id(tm.nodes[i]);
  }
  out += '\n';
  const auto n = tm.values.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j) out += ',';
      out += tm.links(i, j) ? format_double(tm.values(i, j)) : std::string("inf");
    }
    out += '\n';
  }
  return out;
}

TrafficMatrix tm_from_csv(const NetworkGraph& graph, const std::string& csv, Scope scope, Tick tick,
                          std::optional<std::pair<double, double>> normalized_bounds) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) raise(Errc::MalformedConfig, "empty matrix dump");
  TrafficMatrix tm;
  tm.scope = scope;
  tm.tick = tick;
  for (const auto& id : split(line, ',')) tm.nodes.push_back(graph.index_of(id));
  const auto n = static_cast<Eigen::Index>(tm.nodes.size());
  tm.links = LinkMask::Constant(n, n, false);
  tm.values = Matrix::Constant(n, n, kInf);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) raise(Errc::MalformedConfig, "matrix dump has too few rows");
    const auto cells = split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != n) raise(Errc::MalformedConfig, "matrix dump row has wrong width");
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& cell = cells[static_cast<std::size_t>(j)];
      if (cell == "inf") continue;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        raise(Errc::MalformedConfig, "bad matrix cell '" + cell + "'");
      }
      tm.values(i, j) = v;
      tm.links(i, j) = true;
    }
  }
  if (normalized_bounds) {
    tm.normalized = true;
    tm.mu1 = normalized_bounds->first;
    tm.mu2 = normalized_bounds->second;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!tm.links(i, j)) tm.values(i, j) = tm.mu2;
      }
    }
  }
  return tm;
}

MatrixPool::MatrixPool(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) raise(Errc::InvalidRange, "pool capacity must be positive");
}

void MatrixPool::push(TrafficMatrix tm) {
  std::lock_guard lock(mutex_);
  items_.push_back(std::move(tm));
  while (items_.size() > capacity_) items_.pop_front();
}

std::vector<TrafficMatrix> MatrixPool::sample(std::size_t n, std::mt19937_64& rng) const {
  std::lock_guard lock(mutex_);
  if (n > items_.size()) {
    raise(Errc::InsufficientSamples,
          "requested " + std::to_string(n) + " samples from a pool of " + std::to_string(items_.size()));
  }
  std::vector<std::size_t> order(items_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<TrafficMatrix> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(items_[order[i]]);
  return out;
}

std::vector<TrafficMatrix> MatrixPool::contents() const {
  std::lock_guard lock(mutex_);
  return {items_.begin(), items_.end()};
}

std::size_t MatrixPool::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

}  // namespace xdr
