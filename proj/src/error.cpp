#include "xdr/error.hpp"

namespace xdr {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedConfig: return "MalformedConfig";
    case Errc::DanglingEdge: return "DanglingEdge";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::EmptyDomain: return "EmptyDomain";
    case Errc::InvalidRange: return "InvalidRange";
    case Errc::InvalidPath: return "InvalidPath";
    case Errc::NotIntraDomain: return "NotIntraDomain";
    case Errc::NotInterDomain: return "NotInterDomain";
    case Errc::ScopeMismatch: return "ScopeMismatch";
    case Errc::DegenerateRange: return "DegenerateRange";
    case Errc::TickMismatch: return "TickMismatch";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::FrameTooShort: return "FrameTooShort";
    case Errc::BadStatusCode: return "BadStatusCode";
    case Errc::MalformedBody: return "MalformedBody";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::NotConnected: return "NotConnected";
    case Errc::NotRegistered: return "NotRegistered";
    case Errc::Timeout: return "Timeout";
    case Errc::NoRouteInResponse: return "NoRouteInResponse";
    case Errc::BindFailure: return "BindFailure";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::EmptyPathSet: return "EmptyPathSet";
    case Errc::InsufficientPool: return "InsufficientPool";
    case Errc::TooShort: return "TooShort";
    case Errc::WrongWindow: return "WrongWindow";
    case Errc::NoPath: return "NoPath";
    case Errc::Unreachable: return "Unreachable";
    case Errc::MissingDelay: return "MissingDelay";
    case Errc::UnknownLink: return "UnknownLink";
    case Errc::NegativeLoss: return "NegativeLoss";
    case Errc::EmptyWindow: return "EmptyWindow";
    case Errc::MissingCheckpoint: return "MissingCheckpoint";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

int exit_code(Errc code) noexcept { return 10 + static_cast<int>(code); }

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace xdr
