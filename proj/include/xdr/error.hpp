#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xdr {

// Every failure the library reports carries one of these codes. The CLI maps
// each code onto a distinct process exit status (see exit_code()).
enum class Errc {
  // topology
  MalformedConfig,
  DanglingEdge,
  DisconnectedGraph,
  EmptyDomain,
  InvalidRange,
  // netsim
  InvalidPath,
  NotIntraDomain,
  NotInterDomain,
  // telemetry
  ScopeMismatch,
  DegenerateRange,
  TickMismatch,
  InsufficientSamples,
  // coopcomm
  FrameTooShort,
  BadStatusCode,
  MalformedBody,
  DuplicateName,
  NotConnected,
  NotRegistered,
  Timeout,
  NoRouteInResponse,
  BindFailure,
  // neural
  ShapeMismatch,
  BadCheckpoint,
  // agents
  EmptyPathSet,
  InsufficientPool,
  TooShort,
  WrongWindow,
  NoPath,
  // routing
  Unreachable,
  MissingDelay,
  // metrics
  UnknownLink,
  NegativeLoss,
  EmptyWindow,
  // cli
  MissingCheckpoint,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Process exit status for an error class. 0 is reserved for success and 1 for
// unclassified failures.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& what);

}  // namespace xdr
