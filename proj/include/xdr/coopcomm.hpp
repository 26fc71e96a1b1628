#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xdr/error.hpp"
#include "xdr/telemetry.hpp"
#include "xdr/topology.hpp"

namespace xdr::coop {

enum class StatusCode : std::uint8_t {
  SetControllerName = 0b0001,
  SetTopology = 0b0010,
  SynGlobalView = 0b0011,
  AddInterDpid = 0b0100,
  ReqInterProperty = 0b0101,
  ResInterProperty = 0b0110,
};

std::string code_string(StatusCode c);       // "0001" ...
StatusCode parse_code(std::string_view s);   // throws BadStatusCode

struct Message {
  StatusCode code = StatusCode::SetControllerName;
  std::string name;
  std::uint64_t rid = 0;
  nlohmann::json body = nlohmann::json::object();

  bool operator==(const Message&) const = default;
  bool is_ack() const { return body.is_object() && body.contains("ack"); }
  bool is_error() const { return body.is_object() && body.contains("error"); }
};

inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

// 4-byte big-endian length followed by the JSON envelope.
std::vector<std::uint8_t> encode_message(const Message& msg);
// Decodes exactly one frame. Throws FrameTooShort, BadStatusCode, MalformedBody.
Message decode_message(std::span<const std::uint8_t> frame);
// Length of the first complete frame in `buffer`, if one is complete.
std::optional<std::size_t> complete_frame_length(std::span<const std::uint8_t> buffer);

Message make_ack(const Message& request);
Message make_error(const Message& request, Errc code, const std::string& text);
// Throws the Error carried by an error reply; no-op otherwise.
void raise_if_error(const Message& reply);

// Bodies of the Table I codes.
nlohmann::json topology_body(const NetworkGraph& graph, DomainId domain);
std::vector<std::string> interdomain_switches(const NetworkGraph& graph, DomainId domain);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(std::string_view text);  // "host:port"
  // XDR_ROOT_ADDR when set, else `fallback`.
  static Endpoint from_env(const Endpoint& fallback);
  std::string str() const;
};

// Buffers TM snapshots and hands them to `sink` in order once either
// threshold is reached.
class Pipeline {
 public:
  struct Item {
    Tick tick = 0;
    std::string csv;
  };
  using Sink = std::function<void(std::vector<Item>)>;

  Pipeline(std::size_t max_count, std::size_t max_bytes, Sink sink);
  void push(Tick tick, std::string csv);
  void flush();
  std::size_t pending() const;
  std::size_t pending_bytes() const;

 private:
  void flush_locked(std::unique_lock<std::mutex>& lock);

  std::size_t max_count_;
  std::size_t max_bytes_;
  Sink sink_;
  mutable std::mutex mutex_;
  std::vector<Item> buffer_;
  std::size_t bytes_ = 0;
};

// Thread-safe framed stream over one TCP socket.
class Connection {
 public:
  explicit Connection(int fd);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void send(const Message& msg);
  // nullopt on orderly close. Throws on protocol violations.
  std::optional<Message> receive();
  void shutdown();
  bool open() const noexcept { return fd_ >= 0 && !closed_; }

 private:
  bool read_exact(std::uint8_t* dst, std::size_t n);

  int fd_;
  std::atomic<bool> closed_{false};
  std::mutex write_mutex_;
};

struct DomainRecord {
  std::string name;
  DomainId domain = 0;
  nlohmann::json topology;
  std::vector<std::string> dpids;
  Tick last_tick = -1;
  std::uint64_t connection = 0;
  bool live = true;
};

// Per-domain controller state held by the root. All methods are serialized
// by one mutex.
class RootRegistry {
 public:
  RootRegistry(std::shared_ptr<const NetworkGraph> graph, std::size_t tm_history);

  void set_name(const std::string& name, std::uint64_t connection);
  void set_topology(const std::string& name, std::uint64_t connection, const nlohmann::json& topo);
  void set_dpids(const std::string& name, std::uint64_t connection, std::vector<std::string> dpids);
  void store_tm(const std::string& name, std::uint64_t connection, TrafficMatrix tm);
  void disconnect(std::uint64_t connection);

  std::optional<DomainRecord> record(const std::string& name) const;
  std::optional<DomainRecord> record_for_connection(std::uint64_t connection) const;
  std::vector<DomainRecord> records() const;
  std::size_t size() const;
  // Domain TMs of one tick, if every domain delivered it.
  std::optional<std::map<DomainId, TrafficMatrix>> domain_tms_at(Tick tick) const;
  // Smallest last_tick over all domains, or -1 when some domain has none.
  Tick complete_tick() const;
  std::uint64_t tm_count() const;

 private:
  DomainRecord& require(const std::string& name, std::uint64_t connection);

  std::shared_ptr<const NetworkGraph> graph_;
  std::size_t tm_history_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, DomainRecord> records_;
  std::map<DomainId, std::map<Tick, TrafficMatrix>> tms_;
  std::uint64_t tm_count_ = 0;

  friend class RootServer;
};

// Interdomain path for a request; nullopt means no route.
using PathOracle = std::function<std::optional<Path>(NodeIndex src, NodeIndex dst)>;
// Un-normalized border-scope TM for a tick.
using BorderSource = std::function<std::optional<TrafficMatrix>(Tick tick)>;

struct RootOptions {
  Endpoint bind;
  int pull_interval_ms = 0;  // 0 disables the active pull
  std::size_t tm_history = 256;
};

class RootServer {
 public:
  RootServer(std::shared_ptr<const NetworkGraph> graph, RootOptions options);
  ~RootServer();
  RootServer(const RootServer&) = delete;
  RootServer& operator=(const RootServer&) = delete;

  void set_path_oracle(PathOracle oracle);
  void set_border_source(BorderSource source);

  void start();  // throws BindFailure
  void stop();
  bool running() const noexcept { return running_; }
  std::uint16_t port() const noexcept { return port_; }

  RootRegistry& registry() noexcept { return registry_; }
  const RootRegistry& registry() const noexcept { return registry_; }

  // Blocks until every domain delivered `tick` or the deadline passes.
  bool wait_for_tick(Tick tick, int timeout_ms) const;
  // Un-normalized union matrix of one tick, when all inputs are present.
  std::optional<TrafficMatrix> assemble(Tick tick) const;

  std::uint64_t frames_received(StatusCode code) const;
  std::uint64_t responses_sent() const noexcept { return responses_sent_; }
  std::uint64_t errors_sent() const noexcept { return errors_sent_; }

 private:
  struct Peer {
    std::uint64_t id;
    std::shared_ptr<Connection> conn;
    std::thread thread;
  };

  void accept_loop();
  void serve(std::uint64_t id, std::shared_ptr<Connection> conn);
  Message handle(std::uint64_t id, const Message& msg);
  void pull_loop();

  std::shared_ptr<const NetworkGraph> graph_;
  RootOptions options_;
  RootRegistry registry_;
  PathOracle oracle_;
  BorderSource border_;
  mutable std::mutex hooks_mutex_;

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread pull_thread_;
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;

  mutable std::mutex peers_mutex_;
  std::vector<Peer> peers_;
  std::uint64_t next_peer_ = 1;

  mutable std::mutex stats_mutex_;
  std::map<StatusCode, std::uint64_t> received_;
  std::atomic<std::uint64_t> responses_sent_{0};
  std::atomic<std::uint64_t> errors_sent_{0};
};

struct ClientOptions {
  Endpoint root;
  int timeout_ms = 2000;
  std::size_t flush_count = 5;
  std::size_t flush_bytes = 64 * 1024;
  int connect_attempts = 1;
  int retry_delay_ms = 100;
};

class LocalClient {
 public:
  LocalClient(std::shared_ptr<const NetworkGraph> graph, DomainId domain, std::string name, ClientOptions options);
  ~LocalClient();
  LocalClient(const LocalClient&) = delete;
  LocalClient& operator=(const LocalClient&) = delete;

  // Throws NotConnected after the configured attempts.
  void connect();
  void close();
  bool connected() const noexcept { return conn_ && conn_->open(); }
  bool registered() const noexcept { return registered_; }
  const std::string& name() const noexcept { return name_; }
  DomainId domain() const noexcept { return domain_; }

  // 0001, 0010 and 0100, each acknowledged. Throws NotConnected, DuplicateName.
  void local_register();
  // Queues un-normalized domain TMs; frames leave in batches. Throws
  // NotRegistered.
  void syn_global_view(const std::vector<TrafficMatrix>& tms);
  void flush();
  // 0101 -> 0110. Throws NotInterDomain locally, Timeout, NoRouteInResponse.
  Path request_inter_path(NodeIndex src, NodeIndex dst);

  std::uint64_t frames_sent(StatusCode code) const;
  std::uint64_t pulls_received() const noexcept { return pulls_; }

 private:
  Message call(StatusCode code, nlohmann::json body);
  void send(const Message& msg);
  void reader_loop();
  void fail_pending(const std::string& why);

  std::shared_ptr<const NetworkGraph> graph_;
  DomainId domain_;
  std::string name_;
  ClientOptions options_;
  std::shared_ptr<Connection> conn_;
  std::thread reader_;
  std::atomic<bool> registered_{false};
  std::atomic<std::uint64_t> pulls_{0};

  std::mutex pending_mutex_;
  std::map<std::uint64_t, std::promise<Message>> pending_;
  std::atomic<std::uint64_t> next_rid_{1};
  Pipeline pipeline_;

  mutable std::mutex stats_mutex_;
  std::map<StatusCode, std::uint64_t> sent_;
};

}  // namespace xdr::coop
