#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pipeflow {

enum class Errc {
  ManifestMissing,
  CorruptSequence,
  DecodeError,
  DimensionMismatch,
  WriteError,
  EmptyInput,
  ChannelError,
  TooSmall,
  BadConfig,
  SelectionAborted,
  CycleError,
  Unschedulable,
  PartialTrace,
  ProtocolError,
  EmptyTrace,
  EmptySegment,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ManifestMissing:   return "ManifestMissing";
    case Errc::CorruptSequence:   return "CorruptSequence";
    case Errc::DecodeError:       return "DecodeError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::WriteError:        return "WriteError";
    case Errc::EmptyInput:        return "EmptyInput";
    case Errc::ChannelError:      return "ChannelError";
    case Errc::TooSmall:          return "TooSmall";
    case Errc::BadConfig:         return "BadConfig";
    case Errc::SelectionAborted:  return "SelectionAborted";
    case Errc::CycleError:        return "CycleError";
    case Errc::Unschedulable:     return "Unschedulable";
    case Errc::PartialTrace:      return "PartialTrace";
    case Errc::ProtocolError:     return "ProtocolError";
    case Errc::EmptyTrace:        return "EmptyTrace";
    case Errc::EmptySegment:      return "EmptySegment";
  }
  return "UnknownError";
}

/// Library-wide exception type. Every named failure mode carries an Errc so
/// callers and tests can match on the condition instead of message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pipeflow
