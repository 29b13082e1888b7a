#include "hybridrt/error.hpp"

#include <fmt/format.h>

namespace hybridrt {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kDuplicateType: return "DuplicateType";
    case Errc::kUnknownType: return "UnknownType";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kIllegalTransition: return "IllegalTransition";
    case Errc::kUnknownComponent: return "UnknownComponent";
    case Errc::kUnknownInterface: return "UnknownInterface";
    case Errc::kIncompatibleInterfaces: return "IncompatibleInterfaces";
    case Errc::kAlreadyBound: return "AlreadyBound";
    case Errc::kRejectedValue: return "RejectedValue";
    case Errc::kProviderInactive: return "ProviderInactive";
    case Errc::kProviderFault: return "ProviderFault";
    case Errc::kNoBinding: return "NoBinding";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kPortUnavailable: return "PortUnavailable";
    case Errc::kConnectionRefused: return "ConnectionRefused";
    case Errc::kTimeout: return "Timeout";
    case Errc::kChannelClosed: return "ChannelClosed";
    case Errc::kMalformedFrame: return "MalformedFrame";
    case Errc::kNonGroundAssert: return "NonGroundAssert";
    case Errc::kActionFailed: return "ActionFailed";
    case Errc::kPlanFailed: return "PlanFailed";
    case Errc::kUnknownReceiver: return "UnknownReceiver";
    case Errc::kTransportDown: return "TransportDown";
    case Errc::kParseError: return "ParseError";
    case Errc::kSourceUnavailable: return "SourceUnavailable";
    case Errc::kMalformedDoc: return "MalformedDoc";
    case Errc::kStoreUnavailable: return "StoreUnavailable";
    case Errc::kUnknownAgent: return "UnknownAgent";
    case Errc::kSourceEmpty: return "SourceEmpty";
    case Errc::kSourceGone: return "SourceGone";
    case Errc::kDirectoryNotWritable: return "DirectoryNotWritable";
    case Errc::kMismatchedConfigs: return "MismatchedConfigs";
    case Errc::kIncompleteIndex: return "IncompleteIndex";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), what)), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace hybridrt
