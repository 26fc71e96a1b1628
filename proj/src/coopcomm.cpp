#include "xdr/coopcomm.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <set>

#include "xdr/error.hpp"

namespace xdr::coop {

namespace {

using Json = nlohmann::json;

constexpr StatusCode kAllCodes[] = {StatusCode::SetControllerName, StatusCode::SetTopology,
                                    StatusCode::SynGlobalView,     StatusCode::AddInterDpid,
                                    StatusCode::ReqInterProperty,  StatusCode::ResInterProperty};

[[noreturn]] void malformed(const std::string& what) { raise(Errc::MalformedBody, what); }

bool string_array(const Json& j) {
  return j.is_array() && std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_string(); });
}

// Checks the request or response body of each code. Ack and error envelopes
// are accepted for every code.
void validate_body(StatusCode code, const Json& body) {
  if (!body.is_object()) malformed("body must be a JSON object");
  if (body.contains("ack") || body.contains("error")) {
    if (body.contains("error") && !body["error"].is_string()) malformed("error text must be a string");
    return;
  }
  switch (code) {
    case StatusCode::SetControllerName:
      if (!body.contains("name") || !body["name"].is_string()) malformed("0001 needs a string name");
      return;
    case StatusCode::SetTopology:
      if (!body.contains("nodes") || !string_array(body["nodes"])) malformed("0010 needs a node id list");
      if (!body.contains("edges") || !body["edges"].is_array()) malformed("0010 needs an edge list");
      return;
    case StatusCode::SynGlobalView: {
      if (body.empty()) return;  // pull request from the root
      if (!body.contains("tick") || !body.contains("matrix")) malformed("0011 needs tick and matrix");
      const Json& t = body["tick"];
      const Json& m = body["matrix"];
      if (t.is_number_integer() && m.is_string()) return;
      if (!t.is_array() || !string_array(m) || t.size() != m.size() || t.empty()) {
        malformed("0011 tick and matrix arrays must be non-empty and of equal length");
      }
      for (const Json& e : t) {
        if (!e.is_number_integer()) malformed("0011 ticks must be integers");
      }
      return;
    }
    case StatusCode::AddInterDpid:
      if (!body.contains("dpids") || !string_array(body["dpids"])) malformed("0100 needs a dpid list");
      return;
    case StatusCode::ReqInterProperty:
      if (!body.contains("src") || !body["src"].is_string() || !body.contains("dst") || !body["dst"].is_string()) {
        malformed("0101 needs string src and dst");
      }
      return;
    case StatusCode::ResInterProperty:
      if (!body.contains("path") || !string_array(body["path"])) malformed("0110 needs a path list");
      return;
  }
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

Errc errc_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(Errc::Io); ++i) {
    const auto c = static_cast<Errc>(i);
    if (errc_name(c) == name) return c;
  }
  return Errc::MalformedBody;
}

int open_listener(const Endpoint& ep, std::uint16_t& bound_port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
    raise(Errc::BindFailure, "cannot resolve " + ep.str());
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    freeaddrinfo(res);
    raise(Errc::BindFailure, "socket(): " + std::string(std::strerror(errno)));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
    const std::string why = std::strerror(errno);
    freeaddrinfo(res);
    ::close(fd);
    raise(Errc::BindFailure, "cannot listen on " + ep.str() + ": " + why);
  }
  freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port = ntohs(addr.sin_port);
  return fd;
}

int open_client(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) return -1;
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd >= 0) {
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  return fd;
}

}  // namespace

// ------------------------------------------------------------------ codec

std::string code_string(StatusCode c) {
  const auto v = static_cast<unsigned>(c);
  std::string s(4, '0');
  for (int i = 0; i < 4; ++i) s[3 - i] = ((v >> i) & 1u) ? '1' : '0';
  return s;
}

StatusCode parse_code(std::string_view s) {
  for (StatusCode c : kAllCodes) {
    if (code_string(c) == s) return c;
  }
  raise(Errc::BadStatusCode, "unknown status code '" + std::string(s) + "'");
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
  const Json doc = {{"code", code_string(msg.code)}, {"name", msg.name}, {"rid", msg.rid}, {"body", msg.body}};
  const std::string text = doc.dump();
  if (text.size() > kMaxFrameBytes) raise(Errc::MalformedBody, "message exceeds the frame size limit");
  const auto n = static_cast<std::uint32_t>(text.size());
  std::vector<std::uint8_t> out(4 + text.size());
  out[0] = static_cast<std::uint8_t>(n >> 24);
  out[1] = static_cast<std::uint8_t>(n >> 16);
  out[2] = static_cast<std::uint8_t>(n >> 8);
  out[3] = static_cast<std::uint8_t>(n);
  std::memcpy(out.data() + 4, text.data(), text.size());
  return out;
}

std::optional<std::size_t> complete_frame_length(std::span<const std::uint8_t> buffer) {
  if (buffer.size() < 4) return std::nullopt;
  const std::size_t n = read_be32(buffer.data());
  if (buffer.size() < 4 + n) return std::nullopt;
  return 4 + n;
}

Message decode_message(std::span<const std::uint8_t> frame) {
  if (frame.size() < 4) raise(Errc::FrameTooShort, "frame shorter than its length prefix");
  const std::size_t n = read_be32(frame.data());
  if (frame.size() < 4 + n) {
    raise(Errc::FrameTooShort, "frame declares " + std::to_string(n) + " bytes, " +
                                   std::to_string(frame.size() - 4) + " present");
  }
  if (frame.size() > 4 + n) raise(Errc::MalformedBody, "trailing bytes after the frame");
  const Json doc = Json::parse(frame.begin() + 4, frame.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) malformed("frame payload is not a JSON object");
  if (!doc.contains("code") || !doc["code"].is_string()) malformed("missing status code");
  Message msg;
  msg.code = parse_code(doc["code"].get<std::string>());
  if (!doc.contains("name") || !doc["name"].is_string()) malformed("missing controller name");
  if (!doc.contains("rid") || !doc["rid"].is_number_unsigned()) malformed("missing request id");
  if (!doc.contains("body")) malformed("missing body");
  msg.name = doc["name"].get<std::string>();
  msg.rid = doc["rid"].get<std::uint64_t>();
  msg.body = doc["body"];
  validate_body(msg.code, msg.body);
  return msg;
}

Message make_ack(const Message& request) {
  return {request.code, request.name, request.rid, Json{{"ack", true}}};
}

Message make_error(const Message& request, Errc code, const std::string& text) {
  return {request.code, request.name, request.rid, Json{{"error", text}, {"errc", std::string(errc_name(code))}}};
}

void raise_if_error(const Message& reply) {
  if (!reply.is_error()) return;
  const std::string errc = reply.body.value("errc", std::string{});
  raise(errc_from_name(errc), "root: " + reply.body["error"].get<std::string>());
}

Json topology_body(const NetworkGraph& graph, DomainId domain) {
  Json nodes = Json::array();
  Json edges = Json::array();
  for (NodeIndex n : graph.domain_nodes(domain)) nodes.push_back(graph.node_id(n));
  for (const Edge& e : graph.edges()) {
    if (graph.domain_of(e.u) != domain || graph.domain_of(e.v) != domain) continue;
    edges.push_back({{"u", graph.node_id(e.u)},
                     {"v", graph.node_id(e.v)},
                     {"bw", e.attr.capacity_mbit},
                     {"delay", e.attr.base_delay_ms}});
  }
  return {{"nodes", nodes}, {"edges", edges}};
}

std::vector<std::string> interdomain_switches(const NetworkGraph& graph, DomainId domain) {
  std::set<NodeIndex> out;
  for (const BorderLink& b : border_links(graph)) {
    const Edge& e = graph.edge(b.edge);
    if (b.domain_a == domain) out.insert(e.u);
    if (b.domain_b == domain) out.insert(e.v);
  }
  std::vector<std::string> ids;
  for (NodeIndex n : out) ids.push_back(graph.node_id(n));
  return ids;
}

// --------------------------------------------------------------- endpoint

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    raise(Errc::MalformedConfig, "address must look like host:port, got '" + std::string(text) + "'");
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  const std::string port(text.substr(colon + 1));
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (*end != '\0' || p < 0 || p > 65535) raise(Errc::MalformedConfig, "bad port '" + port + "'");
  ep.port = static_cast<std::uint16_t>(p);
  return ep;
}

Endpoint Endpoint::from_env(const Endpoint& fallback) {
  const char* v = std::getenv("XDR_ROOT_ADDR");
  return (v && *v) ? parse(v) : fallback;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

// --------------------------------------------------------------- pipeline

Pipeline::Pipeline(std::size_t max_count, std::size_t max_bytes, Sink sink)
    : max_count_(max_count), max_bytes_(max_bytes), sink_(std::move(sink)) {
  if (max_count_ == 0 || max_bytes_ == 0) raise(Errc::InvalidRange, "pipeline thresholds must be positive");
}

void Pipeline::push(Tick tick, std::string csv) {
  std::unique_lock lock(mutex_);
  bytes_ += csv.size();
  buffer_.push_back({tick, std::move(csv)});
  if (buffer_.size() >= max_count_ || bytes_ >= max_bytes_) flush_locked(lock);
}

void Pipeline::flush() {
  std::unique_lock lock(mutex_);
  flush_locked(lock);
}

void Pipeline::flush_locked(std::unique_lock<std::mutex>&) {
  if (buffer_.empty()) return;
  std::vector<Item> batch;
  batch.swap(buffer_);
  bytes_ = 0;
  // The sink runs under the lock so batches leave in push order.
  sink_(std::move(batch));
}

std::size_t Pipeline::pending() const {
  std::lock_guard lock(mutex_);
  return buffer_.size();
}

std::size_t Pipeline::pending_bytes() const {
  std::lock_guard lock(mutex_);
  return bytes_;
}

// ------------------------------------------------------------- connection

Connection::Connection(int fd) : fd_(fd) {}

Connection::~Connection() {
  shutdown();
  if (fd_ >= 0) ::close(fd_);
}

void Connection::send(const Message& msg) {
  const auto bytes = encode_message(msg);
  std::lock_guard lock(write_mutex_);
  if (closed_) raise(Errc::NotConnected, "connection closed");
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      closed_ = true;
      raise(Errc::NotConnected, "send failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

bool Connection::read_exact(std::uint8_t* dst, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    const ssize_t r = ::recv(fd_, dst + off, n - off, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    off += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<Message> Connection::receive() {
  std::vector<std::uint8_t> frame(4);
  if (!read_exact(frame.data(), 4)) return std::nullopt;
  const std::size_t n = read_be32(frame.data());
  if (n > kMaxFrameBytes) {
    shutdown();  // the stream cannot be resynchronized
    return std::nullopt;
  }
  frame.resize(4 + n);
  if (!read_exact(frame.data() + 4, n)) return std::nullopt;
  return decode_message(frame);
}

void Connection::shutdown() {
  if (fd_ >= 0 && !closed_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
}

// --------------------------------------------------------------- registry

RootRegistry::RootRegistry(std::shared_ptr<const NetworkGraph> graph, std::size_t tm_history)
    : graph_(std::move(graph)), tm_history_(std::max<std::size_t>(1, tm_history)) {}

void RootRegistry::set_name(const std::string& name, std::uint64_t connection) {
  if (name.empty()) raise(Errc::MalformedBody, "controller name must not be empty");
  std::lock_guard lock(mutex_);
  auto it = records_.find(name);
  if (it == records_.end()) {
    DomainRecord rec;
    rec.name = name;
    rec.connection = connection;
    records_.emplace(name, std::move(rec));
  } else if (it->second.live && it->second.connection != connection) {
    raise(Errc::DuplicateName, "controller name '" + name + "' is held by another connection");
  } else {
    // Same connection retrying, or a reconnect after the old one dropped.
    it->second.connection = connection;
    it->second.live = true;
  }
  changed_.notify_all();
}

DomainRecord& RootRegistry::require(const std::string& name, std::uint64_t connection) {
  auto it = records_.find(name);
  if (it == records_.end() || it->second.connection != connection || !it->second.live) {
    raise(Errc::NotRegistered, "controller '" + name + "' has not registered on this connection");
  }
  return it->second;
}

void RootRegistry::set_topology(const std::string& name, std::uint64_t connection, const Json& topo) {
  std::lock_guard lock(mutex_);
  DomainRecord& rec = require(name, connection);
  const auto& ids = topo.at("nodes");
  if (ids.empty()) raise(Errc::MalformedBody, "topology lists no nodes");
  std::optional<DomainId> domain;
  for (const auto& id : ids) {
    const auto n = graph_->find(id.get<std::string>());
    if (!n) raise(Errc::MalformedBody, "unknown switch " + id.get<std::string>());
    const DomainId d = graph_->domain_of(*n);
    if (domain && *domain != d) raise(Errc::MalformedBody, "topology spans several domains");
    domain = d;
  }
  if (graph_->domain_nodes(*domain).size() != ids.size()) {
    raise(Errc::MalformedBody, "topology does not cover its whole domain");
  }
  if (rec.domain != 0) {
    if (rec.domain == *domain && rec.topology == topo) return;
    raise(Errc::DuplicateName, "controller '" + name + "' already registered another topology");
  }
  for (const auto& [other, r] : records_) {
    if (other != name && r.domain == *domain && r.live) {
      raise(Errc::DuplicateName, "domain " + std::to_string(*domain) + " already has controller '" + other + "'");
    }
  }
  rec.domain = *domain;
  rec.topology = topo;
  changed_.notify_all();
}

void RootRegistry::set_dpids(const std::string& name, std::uint64_t connection, std::vector<std::string> dpids) {
  std::lock_guard lock(mutex_);
  DomainRecord& rec = require(name, connection);
  std::sort(dpids.begin(), dpids.end());
  dpids.erase(std::unique(dpids.begin(), dpids.end()), dpids.end());
  rec.dpids = std::move(dpids);
}

void RootRegistry::store_tm(const std::string& name, std::uint64_t connection, TrafficMatrix tm) {
  std::lock_guard lock(mutex_);
  DomainRecord& rec = require(name, connection);
  if (rec.domain == 0) raise(Errc::NotRegistered, "controller '" + name + "' sent matrices before its topology");
  if (tm.scope != Scope::of_domain(rec.domain)) raise(Errc::ScopeMismatch, "matrix scope differs from the domain");
  auto& series = tms_[rec.domain];
  rec.last_tick = std::max(rec.last_tick, tm.tick);
  series.insert_or_assign(tm.tick, std::move(tm));
  while (series.size() > tm_history_) series.erase(series.begin());
  ++tm_count_;
  changed_.notify_all();
}

void RootRegistry::disconnect(std::uint64_t connection) {
  std::lock_guard lock(mutex_);
  for (auto& [name, rec] : records_) {
    if (rec.connection == connection) rec.live = false;
  }
  changed_.notify_all();
}

std::optional<DomainRecord> RootRegistry::record(const std::string& name) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(name);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::optional<DomainRecord> RootRegistry::record_for_connection(std::uint64_t connection) const {
  std::lock_guard lock(mutex_);
  for (const auto& [name, rec] : records_) {
    if (rec.connection == connection && rec.live) return rec;
  }
  return std::nullopt;
}

std::vector<DomainRecord> RootRegistry::records() const {
  std::lock_guard lock(mutex_);
  std::vector<DomainRecord> out;
  for (const auto& [name, rec] : records_) out.push_back(rec);
  return out;
}

std::size_t RootRegistry::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::optional<std::map<DomainId, TrafficMatrix>> RootRegistry::domain_tms_at(Tick tick) const {
  std::lock_guard lock(mutex_);
  std::map<DomainId, TrafficMatrix> out;
  for (DomainId d : graph_->domain_ids()) {
    const auto s = tms_.find(d);
    if (s == tms_.end()) return std::nullopt;
    const auto it = s->second.find(tick);
    if (it == s->second.end()) return std::nullopt;
    out.emplace(d, it->second);
  }
  return out;
}

Tick RootRegistry::complete_tick() const {
  std::lock_guard lock(mutex_);
  Tick out = -1;
  bool first = true;
  for (DomainId d : graph_->domain_ids()) {
    const auto s = tms_.find(d);
    if (s == tms_.end() || s->second.empty()) return -1;
    const Tick last = s->second.rbegin()->first;
    out = first ? last : std::min(out, last);
    first = false;
  }
  return out;
}

std::uint64_t RootRegistry::tm_count() const {
  std::lock_guard lock(mutex_);
  return tm_count_;
}

// ------------------------------------------------------------ root server

RootServer::RootServer(std::shared_ptr<const NetworkGraph> graph, RootOptions options)
    : graph_(std::move(graph)), options_(std::move(options)), registry_(graph_, options_.tm_history) {}

RootServer::~RootServer() { stop(); }

void RootServer::set_path_oracle(PathOracle oracle) {
  std::lock_guard lock(hooks_mutex_);
  oracle_ = std::move(oracle);
}

void RootServer::set_border_source(BorderSource source) {
  std::lock_guard lock(hooks_mutex_);
  border_ = std::move(source);
}

void RootServer::start() {
  if (running_) return;
  listen_fd_ = open_listener(options_.bind, port_);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  if (options_.pull_interval_ms > 0) pull_thread_ = std::thread([this] { pull_loop(); });
}

void RootServer::stop() {
  if (!running_.exchange(false)) return;
  {
    std::lock_guard lock(stop_mutex_);
    stop_cv_.notify_all();
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  if (pull_thread_.joinable()) pull_thread_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<Peer> peers;
  {
    std::lock_guard lock(peers_mutex_);
    peers.swap(peers_);
  }
  for (Peer& p : peers) p.conn->shutdown();
  for (Peer& p : peers) {
    if (p.thread.joinable()) p.thread.join();
  }
}

void RootServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto conn = std::make_shared<Connection>(fd);
    std::lock_guard lock(peers_mutex_);
    if (!running_) {
      conn->shutdown();
      break;
    }
    const std::uint64_t id = next_peer_++;
    peers_.push_back({id, conn, std::thread([this, id, conn] { serve(id, conn); })});
  }
}

void RootServer::serve(std::uint64_t id, std::shared_ptr<Connection> conn) {
  while (running_) {
    std::optional<Message> msg;
    try {
      msg = conn->receive();
    } catch (const Error& e) {
      // Undecodable frame: report it and keep the connection.
      Message probe;
      probe.code = StatusCode::ResInterProperty;
      try {
        conn->send(make_error(probe, e.code(), e.what()));
        ++errors_sent_;
      } catch (const Error&) {
        break;
      }
      continue;
    }
    if (!msg) break;
    {
      std::lock_guard lock(stats_mutex_);
      ++received_[msg->code];
    }
    Message reply;
    // Matrix batches are acknowledged only when they fail.
    bool has_reply = msg->code != StatusCode::SynGlobalView;
    try {
      reply = handle(id, *msg);
    } catch (const Error& e) {
      reply = make_error(*msg, e.code(), e.what());
      has_reply = true;
    } catch (const std::exception& e) {
      reply = make_error(*msg, Errc::MalformedBody, e.what());
      has_reply = true;
    }
    if (!has_reply) continue;
    try {
      conn->send(reply);
    } catch (const Error&) {
      break;
    }
    if (reply.is_error()) {
      ++errors_sent_;
    } else {
      ++responses_sent_;
    }
  }
  registry_.disconnect(id);
}

Message RootServer::handle(std::uint64_t id, const Message& msg) {
  if (msg.is_ack() || msg.is_error()) {
    raise(Errc::MalformedBody, "root does not accept acknowledgements");
  }
  switch (msg.code) {
    case StatusCode::SetControllerName:
      if (msg.body["name"] != msg.name) raise(Errc::MalformedBody, "envelope and body names differ");
      registry_.set_name(msg.name, id);
      return make_ack(msg);
    case StatusCode::SetTopology:
      registry_.set_topology(msg.name, id, msg.body);
      return make_ack(msg);
    case StatusCode::AddInterDpid:
      registry_.set_dpids(msg.name, id, msg.body["dpids"].get<std::vector<std::string>>());
      return make_ack(msg);
    case StatusCode::SynGlobalView: {
      const auto rec = registry_.record(msg.name);
      if (!rec || rec->connection != id || rec->domain == 0) {
        raise(Errc::NotRegistered, "matrices from unregistered controller '" + msg.name + "'");
      }
      const Scope scope = Scope::of_domain(rec->domain);
      std::vector<Tick> ticks;
      std::vector<std::string> csvs;
      if (msg.body["tick"].is_array()) {
        ticks = msg.body["tick"].get<std::vector<Tick>>();
        csvs = msg.body["matrix"].get<std::vector<std::string>>();
      } else {
        ticks.push_back(msg.body["tick"].get<Tick>());
        csvs.push_back(msg.body["matrix"].get<std::string>());
      }
      for (std::size_t i = 0; i < ticks.size(); ++i) {
        registry_.store_tm(msg.name, id, tm_from_csv(*graph_, csvs[i], scope, ticks[i]));
      }
      return make_ack(msg);
    }
    case StatusCode::ReqInterProperty: {
      const auto rec = registry_.record(msg.name);
      if (!rec || rec->connection != id || rec->domain == 0) {
        raise(Errc::NotRegistered, "path request from unregistered controller '" + msg.name + "'");
      }
      const auto src = graph_->find(msg.body["src"].get<std::string>());
      const auto dst = graph_->find(msg.body["dst"].get<std::string>());
      if (!src || !dst) raise(Errc::MalformedBody, "unknown switch in path request");
      if (graph_->domain_of(*src) != rec->domain) raise(Errc::NotInterDomain, "source outside the caller's domain");
      if (graph_->domain_of(*dst) == rec->domain) raise(Errc::NotInterDomain, "destination inside the caller's domain");
      PathOracle oracle;
      {
        std::lock_guard lock(hooks_mutex_);
        oracle = oracle_;
      }
      if (!oracle) raise(Errc::NoRouteInResponse, "root has no path oracle");
      const std::optional<Path> path = oracle(*src, *dst);
      if (!path || path->empty()) raise(Errc::NoRouteInResponse, "no route between the switches");
      Json ids = Json::array();
      for (NodeIndex n : *path) ids.push_back(graph_->node_id(n));
      return {StatusCode::ResInterProperty, msg.name, msg.rid, Json{{"path", ids}}};
    }
    case StatusCode::ResInterProperty:
      raise(Errc::BadStatusCode, "0110 is a root-to-local code");
  }
  raise(Errc::BadStatusCode, "unhandled status code");
}

void RootServer::pull_loop() {
  std::unique_lock lock(stop_mutex_);
  while (running_) {
    stop_cv_.wait_for(lock, std::chrono::milliseconds(options_.pull_interval_ms));
    if (!running_) break;
    std::vector<std::pair<std::string, std::shared_ptr<Connection>>> targets;
    {
      std::lock_guard plock(peers_mutex_);
      for (const Peer& p : peers_) {
        if (const auto rec = registry_.record_for_connection(p.id); rec && rec->domain != 0) {
          targets.emplace_back(rec->name, p.conn);
        }
      }
    }
    for (auto& [name, conn] : targets) {
      try {
        conn->send({StatusCode::SynGlobalView, name, 0, Json::object()});
      } catch (const Error&) {
      }
    }
  }
}

bool RootServer::wait_for_tick(Tick tick, int timeout_ms) const {
  std::unique_lock lock(registry_.mutex_);
  const auto ready = [&] {
    for (DomainId d : graph_->domain_ids()) {
      const auto s = registry_.tms_.find(d);
      if (s == registry_.tms_.end() || !s->second.count(tick)) return false;
    }
    return true;
  };
  return registry_.changed_.wait_for(lock, std::chrono::milliseconds(timeout_ms), ready);
}

std::optional<TrafficMatrix> RootServer::assemble(Tick tick) const {
  const auto domain_tms = registry_.domain_tms_at(tick);
  if (!domain_tms) return std::nullopt;
  BorderSource border;
  {
    std::lock_guard lock(hooks_mutex_);
    border = border_;
  }
  if (!border) return std::nullopt;
  const std::optional<TrafficMatrix> b = border(tick);
  if (!b) return std::nullopt;
  return assemble_utm(*graph_, *domain_tms, *b);
}

std::uint64_t RootServer::frames_received(StatusCode code) const {
  std::lock_guard lock(stats_mutex_);
  const auto it = received_.find(code);
  return it == received_.end() ? 0 : it->second;
}

// ----------------------------------------------------------- local client

LocalClient::LocalClient(std::shared_ptr<const NetworkGraph> graph, DomainId domain, std::string name,
                         ClientOptions options)
    : graph_(std::move(graph)),
      domain_(domain),
      name_(std::move(name)),
      options_(std::move(options)),
      pipeline_(options_.flush_count, options_.flush_bytes, [this](std::vector<Pipeline::Item> batch) {
        Json ticks = Json::array();
        Json mats = Json::array();
        for (auto& item : batch) {
          ticks.push_back(item.tick);
          mats.push_back(std::move(item.csv));
        }
        send({StatusCode::SynGlobalView, name_, next_rid_++, Json{{"tick", ticks}, {"matrix", mats}}});
      }) {
  if (graph_->domain_nodes(domain_).empty()) raise(Errc::EmptyDomain, "client domain has no switches");
  if (options_.timeout_ms <= 0) raise(Errc::InvalidRange, "client timeout must be positive");
}

LocalClient::~LocalClient() { close(); }

void LocalClient::connect() {
  if (connected()) return;
  close();
  const int attempts = std::max(1, options_.connect_attempts);
  int fd = -1;
  for (int i = 0; i < attempts && fd < 0; ++i) {
    if (i > 0) std::this_thread::sleep_for(std::chrono::milliseconds(options_.retry_delay_ms));
    fd = open_client(options_.root);
  }
  if (fd < 0) raise(Errc::NotConnected, "cannot reach root at " + options_.root.str());
  conn_ = std::make_shared<Connection>(fd);
  reader_ = std::thread([this] { reader_loop(); });
}

void LocalClient::close() {
  if (conn_) conn_->shutdown();
  if (reader_.joinable()) reader_.join();
  conn_.reset();
  registered_ = false;
  fail_pending("connection closed");
}

void LocalClient::send(const Message& msg) {
  if (!connected()) raise(Errc::NotConnected, "not connected to the root");
  conn_->send(msg);
  std::lock_guard lock(stats_mutex_);
  ++sent_[msg.code];
}

void LocalClient::reader_loop() {
  const std::shared_ptr<Connection> conn = conn_;
  while (true) {
    std::optional<Message> msg;
    try {
      msg = conn->receive();
    } catch (const Error&) {
      continue;
    }
    if (!msg) break;
    if (msg->code == StatusCode::SynGlobalView && msg->body.empty()) {
      ++pulls_;
      try {
        pipeline_.flush();
      } catch (const Error&) {
      }
      continue;
    }
    std::lock_guard lock(pending_mutex_);
    const auto it = pending_.find(msg->rid);
    if (it == pending_.end()) continue;
    it->second.set_value(std::move(*msg));
    pending_.erase(it);
  }
  conn->shutdown();
  fail_pending("connection lost");
}

void LocalClient::fail_pending(const std::string& why) {
  std::lock_guard lock(pending_mutex_);
  for (auto& [rid, promise] : pending_) {
    promise.set_exception(std::make_exception_ptr(Error(Errc::NotConnected, why)));
  }
  pending_.clear();
}

Message LocalClient::call(StatusCode code, Json body) {
  if (!connected()) raise(Errc::NotConnected, "not connected to the root");
  const std::uint64_t rid = next_rid_++;
  std::future<Message> reply;
  {
    std::lock_guard lock(pending_mutex_);
    reply = pending_[rid].get_future();
  }
  try {
    send({code, name_, rid, std::move(body)});
  } catch (...) {
    std::lock_guard lock(pending_mutex_);
    pending_.erase(rid);
    throw;
  }
  if (reply.wait_for(std::chrono::milliseconds(options_.timeout_ms)) != std::future_status::ready) {
    std::lock_guard lock(pending_mutex_);
    pending_.erase(rid);
    raise(Errc::Timeout, "no reply from the root within " + std::to_string(options_.timeout_ms) + " ms");
  }
  Message msg = reply.get();
  raise_if_error(msg);
  return msg;
}

void LocalClient::local_register() {
  call(StatusCode::SetControllerName, Json{{"name", name_}});
  call(StatusCode::SetTopology, topology_body(*graph_, domain_));
  call(StatusCode::AddInterDpid, Json{{"dpids", interdomain_switches(*graph_, domain_)}});
  registered_ = true;
}

void LocalClient::syn_global_view(const std::vector<TrafficMatrix>& tms) {
  if (!registered_) raise(Errc::NotRegistered, "register before streaming matrices");
  for (const TrafficMatrix& tm : tms) {
    if (tm.scope != Scope::of_domain(domain_)) raise(Errc::ScopeMismatch, "matrix scope differs from the domain");
    if (tm.normalized) raise(Errc::ScopeMismatch, "the root expects un-normalized matrices");
    pipeline_.push(tm.tick, tm_to_csv(*graph_, tm));
  }
}

void LocalClient::flush() { pipeline_.flush(); }

Path LocalClient::request_inter_path(NodeIndex src, NodeIndex dst) {
  if (src >= graph_->node_count() || dst >= graph_->node_count()) raise(Errc::InvalidPath, "switch index out of range");
  if (graph_->domain_of(src) != domain_ || graph_->domain_of(dst) == domain_) {
    raise(Errc::NotInterDomain, "request needs a local source and a foreign destination");
  }
  if (!registered_) raise(Errc::NotRegistered, "register before requesting paths");
  const Message reply =
      call(StatusCode::ReqInterProperty, Json{{"src", graph_->node_id(src)}, {"dst", graph_->node_id(dst)}});
  if (reply.code != StatusCode::ResInterProperty || !reply.body.contains("path")) {
    raise(Errc::NoRouteInResponse, "reply carries no path");
  }
  Path path;
  for (const auto& id : reply.body["path"]) {
    const auto n = graph_->find(id.get<std::string>());
    if (!n) raise(Errc::NoRouteInResponse, "reply names an unknown switch");
    path.push_back(*n);
  }
  if (!is_simple_path(*graph_, path, src, dst)) raise(Errc::NoRouteInResponse, "reply path does not join the pair");
  return path;
}

std::uint64_t LocalClient::frames_sent(StatusCode code) const {
  std::lock_guard lock(stats_mutex_);
  const auto it = sent_.find(code);
  return it == sent_.end() ? 0 : it->second;
}

}  // namespace xdr::coop
