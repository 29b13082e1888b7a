#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybridrt {

enum class Errc {
  kDuplicateType,
  kUnknownType,
  kDuplicateId,
  kIllegalTransition,
  kUnknownComponent,
  kUnknownInterface,
  kIncompatibleInterfaces,
  kAlreadyBound,
  kRejectedValue,
  kProviderInactive,
  kProviderFault,
  kNoBinding,
  kInvalidArgument,
  // backchannel
  kPortUnavailable,
  kConnectionRefused,
  kTimeout,
  kChannelClosed,
  kMalformedFrame,
  // agents
  kNonGroundAssert,
  kActionFailed,
  kPlanFailed,
  kUnknownReceiver,
  kTransportDown,
  kParseError,
  // pipeline
  kSourceUnavailable,
  kMalformedDoc,
  kStoreUnavailable,
  kUnknownAgent,
  kSourceEmpty,
  kSourceGone,
  // bench
  kDirectoryNotWritable,
  kMismatchedConfigs,
  kIncompleteIndex,
};

std::string_view to_string(Errc code);

/// Every runtime failure surfaces as an Error carrying one Errc.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace hybridrt
