#pragma once

#include <stdexcept>
#include <string>

namespace tssdn {

enum class Errc {
  Parse,
  DuplicateId,
  UnknownZone,
  UnknownNode,
  InvalidTopology,
  SchedulingInPast,
  Overlap,
  MissingSlot,
  Unrealizable,
  UnknownStream,
  InsufficientBandwidth,
  StaticMutationAttempt,
  NoPath,
  AggregationWithExposed,
  ValidationFailure,
  Usage,
};

const char* errc_name(Errc c);

// All recoverable failures surface as tssdn::Error. The code lets callers
// (mainly the CLI) map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tssdn
